use crate::error::{Error, Result};

/// Outcome of a rank correlation: defined, or undefined because one side is constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rho {
    Value(f64),
    Degenerate,
}

impl Rho {
    pub fn value(self) -> Option<f64> {
        match self {
            Rho::Value(r) => Some(r),
            Rho::Degenerate => None,
        }
    }
}

/// Ranks starting at 1; tied entries share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Rho {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Rho::Degenerate;
    }
    Rho::Value((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with average-rank ties.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<Rho> {
    if xs.len() != ys.len() {
        return Err(Error::Shape(format!("{} xs but {} ys", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput(
            "rank correlation needs at least two points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN in rank correlation input".into()));
    }
    Ok(pearson(&average_ranks(xs), &average_ranks(ys)))
}
