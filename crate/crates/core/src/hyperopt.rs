//! Minimisation of a criterion over the prior hyperparameters: a grid over
//! `log xi` followed by Nelder-Mead refinement from the best grid point.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::par::{map_indices_with, Execution};

/// Search box and budget. Bounds are base-10 exponents of `xi`, one pair per
/// group (a single pair is broadcast to every group).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XiSearchSpace {
    pub log_lo: Vec<f64>,
    pub log_hi: Vec<f64>,
    pub grid_points: usize,
    /// Maximum number of Nelder-Mead evaluations; 0 means grid only.
    pub simplex_budget: usize,
    /// Stop when the simplex diameter in `ln xi` drops below this.
    pub simplex_tol: f64,
}

impl Default for XiSearchSpace {
    fn default() -> Self {
        XiSearchSpace { log_lo: vec![-3.0], log_hi: vec![3.0], grid_points: 15, simplex_budget: 200, simplex_tol: 1e-4 }
    }
}

impl XiSearchSpace {
    pub fn grid_only(&self) -> Self {
        XiSearchSpace { simplex_budget: 0, ..self.clone() }
    }

    /// Natural-log bounds per group.
    fn bounds(&self, q: usize) -> Result<Vec<(f64, f64)>> {
        let pick = |v: &[f64], k: usize| -> Result<f64> {
            match v.len() {
                1 => Ok(v[0]),
                l if l == q => Ok(v[k]),
                l => invalid(format!("search bounds have {l} entries for {q} groups")),
            }
        };
        (0..q)
            .map(|k| {
                let (lo, hi) = (pick(&self.log_lo, k)?, pick(&self.log_hi, k)?);
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return invalid(format!("invalid search bounds [{lo}, {hi}]"));
                }
                Ok((lo * std::f64::consts::LN_10, hi * std::f64::consts::LN_10))
            })
            .collect()
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        if q == 0 {
            return invalid("search needs at least one hyperparameter");
        }
        if self.grid_points == 0 {
            return invalid("grid_points must be positive");
        }
        if !(self.simplex_tol > 0.0) {
            return invalid("simplex_tol must be positive");
        }
        self.bounds(q).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub xi: Vec<f64>,
    /// `None` when the objective was non-finite at this point.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub xi_hat: Vec<f64>,
    pub value: f64,
    pub trace: Vec<TraceEntry>,
    pub grid_evaluations: usize,
    pub simplex_evaluations: usize,
}

/// Minimises `objective` over `xi` in `space` with `q` groups.
///
/// Grid points are visited in lexicographic order of `xi`; ties keep the
/// lexicographically smallest point. Non-finite values are skipped, errors
/// abort the search with the offending `xi`. `seeds` are extra candidate
/// points evaluated with the grid (clamped to the box).
pub fn minimize_criterion<F>(objective: F, q: usize, space: &XiSearchSpace, seeds: &[Vec<f64>]) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    minimize_criterion_with(Execution::Auto, objective, q, space, seeds)
}

pub fn minimize_criterion_with<F>(
    exec: Execution,
    objective: F,
    q: usize,
    space: &XiSearchSpace,
    seeds: &[Vec<f64>],
) -> Result<SearchResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    space.validate(q)?;
    let bounds = space.bounds(q)?;
    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(lo, hi)| {
            if space.grid_points == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                let step = (hi - lo) / (space.grid_points - 1) as f64;
                (0..space.grid_points).map(|i| lo + step * i as f64).collect()
            }
        })
        .collect();
    let total = space.grid_points.pow(q as u32);
    let mut points: Vec<Vec<f64>> = (0..total)
        .map(|mut idx| {
            let mut u = vec![0.0; q];
            for k in (0..q).rev() {
                u[k] = axes[k][idx % space.grid_points];
                idx /= space.grid_points;
            }
            u
        })
        .collect();
    for s in seeds {
        if s.len() != q || s.iter().any(|v| !(*v > 0.0)) {
            return invalid("seed points must be positive with one entry per group");
        }
        points.push(clamp(&s.iter().map(|v| v.ln()).collect::<Vec<_>>(), &bounds));
    }

    let eval = |u: &[f64]| -> Result<TraceEntry> {
        let xi: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        match objective(&xi) {
            Ok(v) => Ok(TraceEntry { value: v.is_finite().then_some(v), xi }),
            Err(e) => Err(Error::Objective { xi, source: Box::new(e) }),
        }
    };
    let grid: Vec<TraceEntry> =
        map_indices_with(exec, points.len(), |i| eval(&points[i])).into_iter().collect::<Result<_>>()?;
    let grid_evaluations = grid.len();
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in grid.iter().enumerate() {
        if let Some(v) = e.value {
            let better = match best {
                None => true,
                Some((bi, bv)) => v < bv || (v == bv && lex_less(&e.xi, &grid[bi].xi)),
            };
            if better {
                best = Some((i, v));
            }
        }
    }
    let Some((bi, _)) = best else {
        return Err(Error::NoFiniteEvaluation);
    };
    let mut trace = grid;
    let start = points[bi].clone();

    let mut simplex_evaluations = 0;
    if space.simplex_budget > 0 {
        let step: Vec<f64> = bounds
            .iter()
            .map(|&(lo, hi)| {
                let w = if space.grid_points > 1 { (hi - lo) / (space.grid_points - 1) as f64 } else { hi - lo };
                if w > 0.0 {
                    0.5 * w
                } else {
                    0.0
                }
            })
            .collect();
        if step.iter().any(|s| *s > 0.0) {
            let mut f = |u: &[f64]| -> Result<f64> {
                let e = eval(u)?;
                let v = e.value.unwrap_or(f64::INFINITY);
                trace.push(e);
                Ok(v)
            };
            simplex_evaluations = nelder_mead(&mut f, &start, &step, &bounds, space.simplex_budget, space.simplex_tol)?;
        }
    }

    let (mut bi, mut bv) = (0usize, f64::INFINITY);
    for (i, e) in trace.iter().enumerate() {
        if let Some(v) = e.value {
            if v < bv || (v == bv && lex_less(&e.xi, &trace[bi].xi)) {
                bi = i;
                bv = v;
            }
        }
    }
    Ok(SearchResult { xi_hat: trace[bi].xi.clone(), value: bv, trace, grid_evaluations, simplex_evaluations })
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

fn clamp(u: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    u.iter().zip(bounds).map(|(v, &(lo, hi))| v.clamp(lo, hi)).collect()
}

/// Bounded Nelder-Mead (points are clamped to the box). Returns the number
/// of evaluations used.
fn nelder_mead<F>(
    f: &mut F,
    start: &[f64],
    step: &[f64],
    bounds: &[(f64, f64)],
    budget: usize,
    tol: f64,
) -> Result<usize>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let d = start.len();
    let mut used = 0usize;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let f0 = f(start)?;
    used += 1;
    simplex.push((start.to_vec(), f0));
    for k in 0..d {
        if used >= budget {
            return Ok(used);
        }
        let mut v = start.to_vec();
        v[k] += step[k];
        if v[k] > bounds[k].1 {
            v[k] = start[k] - step[k];
        }
        let v = clamp(&v, bounds);
        let fv = f(&v)?;
        used += 1;
        simplex.push((v, fv));
    }
    let sort = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| {
            a.1.total_cmp(&b.1)
                .then_with(|| a.0.iter().zip(&b.0).fold(std::cmp::Ordering::Equal, |o, (x, y)| o.then(x.total_cmp(y))))
        })
    };
    while used < budget {
        sort(&mut simplex);
        let diameter = simplex[1..]
            .iter()
            .map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter <= tol {
            break;
        }
        let centroid: Vec<f64> =
            (0..d).map(|k| simplex[..d].iter().map(|(v, _)| v[k]).sum::<f64>() / d as f64).collect();
        let worst = simplex[d].clone();
        let along =
            |t: f64| clamp(&(0..d).map(|k| centroid[k] + t * (worst.0[k] - centroid[k])).collect::<Vec<_>>(), bounds);
        let xr = along(-1.0);
        let fr = f(&xr)?;
        used += 1;
        if fr < simplex[0].1 {
            if used >= budget {
                simplex[d] = (xr, fr);
                break;
            }
            let xe = along(-2.0);
            let fe = f(&xe)?;
            used += 1;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            if used >= budget {
                break;
            }
            let (xc, fc) = if fr < worst.1 {
                let xc = along(-0.5);
                let fc = f(&xc)?;
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc)?;
                (xc, fc)
            };
            used += 1;
            if fc < worst.1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for i in 1..=d {
                    if used >= budget {
                        break;
                    }
                    let v: Vec<f64> = (0..d).map(|k| best[k] + 0.5 * (simplex[i].0[k] - best[k])).collect();
                    let fv = f(&v)?;
                    used += 1;
                    simplex[i] = (v, fv);
                }
            }
        }
    }
    Ok(used)
}
