//! Euclidean projection onto the feasible region
//! `C = { p in simplex } x [b_min, 1]` and the projected gradient mapping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, Strategy, SIMPLEX_TOL};

/// Probability simplex over `m` assets times the retention interval `[b_min, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRegion {
    m: usize,
    b_min: f64,
}

impl FeasibleRegion {
    pub fn new(m: usize, b_min: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "region needs at least one asset".into(),
            ));
        }
        if !(b_min > 0.0 && b_min <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "b_min must lie in (0, 1], got {b_min}"
            )));
        }
        Ok(FeasibleRegion { m, b_min })
    }

    /// Region matching `model`, rejecting floors below `1 - c1/c2`.
    pub fn for_model(model: &ModelParams, b_min: f64) -> Result<Self> {
        let region = FeasibleRegion::new(model.n_assets(), b_min)?;
        model.check_retention_floor(b_min)?;
        Ok(region)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn b_min(&self) -> f64 {
        self.b_min
    }

    pub fn dim(&self) -> usize {
        self.m + 1
    }

    pub fn contains(&self, s: &Strategy) -> bool {
        s.p().len() == self.m
            && s.p().iter().all(|&x| x >= 0.0)
            && (s.p().iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
            && s.b() >= self.b_min
            && s.b() <= 1.0
    }
}

/// Projection onto the unit simplex by sorting and thresholding.
///
/// Points already on the simplex (to [`SIMPLEX_TOL`]) are returned unchanged.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot project an empty vector".into(),
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite input to simplex projection: {v:?}"
        )));
    }
    if v.len() == 1 {
        return Ok(vec![1.0]);
    }
    if v.iter().all(|&x| x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL {
        return Ok(v.to_vec());
    }

    let mut sorted = v.to_vec();
    // descending; ties keep index order
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        cumulative += x;
        let candidate = (cumulative - 1.0) / (k + 1) as f64;
        if x - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    Ok(v.iter().map(|&x| (x - tau).max(0.0)).collect())
}

pub fn project_interval(x: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo <= hi) {
        return Err(Error::InvalidArgument(format!(
            "empty interval [{lo}, {hi}]"
        )));
    }
    Ok(x.clamp(lo, hi))
}

/// Projects a flattened `(p, b)` point of length `m + 1` onto the region.
pub fn project_feasible(region: &FeasibleRegion, x: &[f64]) -> Result<Strategy> {
    if x.len() != region.dim() {
        return Err(Error::Shape {
            expected: region.dim(),
            got: x.len(),
        });
    }
    let (p, b) = x.split_at(region.m);
    let p = project_simplex(p)?;
    let b = project_interval(b[0], region.b_min, 1.0)?;
    Ok(Strategy::from_parts(p, b))
}

/// `(x - proj(x - gamma g)) / gamma`.
pub fn projected_gradient_mapping(
    region: &FeasibleRegion,
    x: &Strategy,
    g: &[f64],
    gamma: f64,
) -> Result<Vec<f64>> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "step size must be positive, got {gamma}"
        )));
    }
    let (mapping, _) = gradient_step(region, x, g, gamma)?;
    Ok(mapping)
}

/// Takes the projected step and returns both the gradient mapping and the new point.
pub(crate) fn gradient_step(
    region: &FeasibleRegion,
    x: &Strategy,
    g: &[f64],
    gamma: f64,
) -> Result<(Vec<f64>, Strategy)> {
    let current = x.to_vec();
    if g.len() != current.len() {
        return Err(Error::Shape {
            expected: current.len(),
            got: g.len(),
        });
    }
    let trial: Vec<f64> = current
        .iter()
        .zip(g)
        .map(|(xi, gi)| xi - gamma * gi)
        .collect();
    let next = project_feasible(region, &trial)?;
    let mapping = current
        .iter()
        .zip(next.to_vec())
        .map(|(a, b)| (a - b) / gamma)
        .collect();
    Ok((mapping, next))
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}


/// Exhaustive reference projection, independent of the sort-based routine.
pub mod oracle {
    /// Projects `v` onto the unit simplex by trying every support set,
    /// solving the equality-constrained problem on it, and keeping the closest
    /// feasible candidate. Exponential in `v.len()`; meant for `len <= ~16`.
    pub fn project_simplex_active_set(v: &[f64]) -> Vec<f64> {
        let m = v.len();
        assert!(
            (1..=20).contains(&m),
            "active-set oracle supports 1..=20 coordinates"
        );
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 1u32..(1u32 << m) {
            let support: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            let shift = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
            let mut y = vec![0.0; m];
            let mut feasible = true;
            for &i in &support {
                y[i] = v[i] - shift;
                if y[i] < 0.0 {
                    feasible = false;
                    break;
                }
            }
            if !feasible {
                continue;
            }
            let dist: f64 = v.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
            if best.as_ref().is_none_or(|(d, _)| dist < *d) {
                best = Some((dist, y));
            }
        }
        best.expect("the single-vertex supports are always feasible")
            .1
    }
}
