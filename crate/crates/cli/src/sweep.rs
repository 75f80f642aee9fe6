use dynapitch_core::KickerParams;

use crate::{Failure, SweepArgs};

pub fn run(args: SweepArgs) -> Result<(), Failure> {
    let v_caps = parse_range("v-cap", &args.v_cap)?;
    let etas = parse_range("eta", &args.eta)?;
    let mut out = String::from("v_cap,eta,ball_speed\n");
    for &eta in &etas {
        let params = KickerParams {
            efficiency: eta,
            ..KickerParams::default()
        };
        params.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        for &v in &v_caps {
            if v < 0.0 {
                return Err(Failure::Usage(format!("v-cap {v} is negative")));
            }
            out.push_str(&format!("{v},{eta},{}\n", params.launch_speed(v)));
        }
    }
    print!("{out}");
    Ok(())
}

/// `START:STOP:STEP` (inclusive) or a single value.
pub fn parse_range(name: &str, spec: &str) -> Result<Vec<f64>, Failure> {
    let bad = |why: &str| Failure::Usage(format!("--{name} '{spec}': {why}"));
    let nums = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| bad("not a number"))?;
    if nums.iter().any(|v| !v.is_finite()) {
        return Err(bad("not finite"));
    }
    let (start, stop, step) = match nums[..] {
        [v] => return Ok(vec![v]),
        [start, stop, step] => (start, stop, step),
        _ => return Err(bad("expected START:STOP:STEP or a single value")),
    };
    if step <= 0.0 {
        return Err(bad("step must be positive"));
    }
    let slack = 1e-9 * step;
    let values: Vec<f64> = (0..)
        .map(|i| start + i as f64 * step)
        .take_while(|v| *v <= stop + slack)
        .take(1_000_000)
        .collect();
    if values.is_empty() {
        return Err(bad("empty range"));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("x", "0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_range("x", "190").unwrap(), vec![190.0]);
        assert_eq!(parse_range("x", "0:0.3:0.1").unwrap().len(), 4);
        assert!(parse_range("x", "5:1:1").is_err());
        assert!(parse_range("x", "0:1:0").is_err());
        assert!(parse_range("x", "a:b").is_err());
    }
}
