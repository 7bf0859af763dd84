//! Parameter grids: `a,b,c` lists or geometric `lo:hi:n` ranges.

pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(format!("geometric grid must be lo:hi:n, got {text:?}"));
        };
        let lo = parse_number(lo)?;
        let hi = parse_number(hi)?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|e| format!("bad point count {n:?}: {e}"))?;
        if !(lo > 0.0 && hi > 0.0 && lo.is_finite() && hi.is_finite()) {
            return Err(format!("geometric grid needs positive finite ends, got {lo}:{hi}"));
        }
        if n == 0 {
            return Err("geometric grid needs at least one point".into());
        }
        if n == 1 {
            return Ok(vec![lo]);
        }
        let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
        // Hit both ends exactly.
        Ok((0..n)
            .map(|i| match i {
                0 => lo,
                i if i == n - 1 => hi,
                i => lo * ratio.powi(i as i32),
            })
            .collect())
    } else {
        text.split(',').map(parse_number).collect()
    }
}

pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    s.parse::<f64>().map_err(|e| format!("bad number {s:?}: {e}"))
}
