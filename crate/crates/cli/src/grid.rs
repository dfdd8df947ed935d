//! Grid syntax: comma-separated items, each a number or `start:stop:step`
//! (stop inclusive).

pub fn parse_real_grid(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim) {
        if item.is_empty() {
            return Err(format!("empty item in grid `{s}`"));
        }
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [x] => out.push(number(x)?),
            [a, b, h] => {
                let (a, b, h) = (number(a)?, number(b)?, number(h)?);
                if !(h > 0.0) {
                    return Err(format!("step must be positive in `{item}`"));
                }
                if b < a {
                    return Err(format!("stop below start in `{item}`"));
                }
                // a little slack so that 0.1:0.3:0.1 keeps 0.3
                let count = ((b - a) / h + 1e-9).floor() as usize + 1;
                if count > 1_000_000 {
                    return Err(format!("`{item}` expands to {count} points"));
                }
                out.extend((0..count).map(|i| a + i as f64 * h));
            }
            _ => return Err(format!("`{item}` is neither a number nor start:stop:step")),
        }
    }
    Ok(out)
}

pub fn parse_index_grid(s: &str) -> Result<Vec<usize>, String> {
    parse_real_grid(s)?
        .into_iter()
        .map(|x| {
            if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
                Ok(x as usize)
            } else {
                Err(format!("grid `{s}` contains {x}, expected non-negative integers"))
            }
        })
        .collect()
}

fn number(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_real_grid("1,2,5").unwrap(), vec![1.0, 2.0, 5.0]);
        assert_eq!(parse_real_grid("10:40:10").unwrap(), vec![10.0, 20.0, 30.0, 40.0]);
        assert_eq!(parse_real_grid("0.1:0.3:0.1").unwrap().len(), 3);
        assert_eq!(parse_real_grid("1, 3:4:0.5").unwrap(), vec![1.0, 3.0, 3.5, 4.0]);
        assert_eq!(parse_index_grid("4:12:2").unwrap(), vec![4, 6, 8, 10, 12]);
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["", "1,,2", "a", "1:2", "2:1:1", "1:2:0", "1:2:3:4", "inf"] {
            assert!(parse_real_grid(bad).is_err(), "{bad}");
        }
        assert!(parse_index_grid("1.5").is_err());
        assert!(parse_index_grid("-1").is_err());
    }
}
