use serde::{Deserialize, Serialize};

use super::spectrum::{GridSpec, MusicEngine, SpectrumGrid};
use super::subspace::SubspaceOptions;
use crate::em::field::FieldSamples;
use crate::em::geometry::{angle_between, canonical_angles, wave_vector};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DoaOptions {
    pub grid: GridSpec,
    /// Minimum great-circle separation between reported peaks (rad).
    pub min_separation: f64,
    /// Refinement stops when the simplex spans less than this angle (rad).
    pub refine_tol: f64,
    pub max_evals: usize,
    /// At most this many coarse maxima are refined.
    pub max_candidates: usize,
    /// Accept only peaks whose value exceeds this multiple of the grid median.
    pub min_peak_ratio: Option<f64>,
    pub subspace: SubspaceOptions,
}

impl Default for DoaOptions {
    fn default() -> Self {
        DoaOptions {
            grid: GridSpec::default(),
            min_separation: 3f64.to_radians(),
            refine_tol: 1e-5,
            max_evals: 400,
            max_candidates: 32,
            min_peak_ratio: None,
            subspace: SubspaceOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoaPeak {
    pub theta: f64,
    pub phi: f64,
    pub value: f64,
    #[serde(default)]
    pub exact_null: bool,
}

/// Estimated directions sorted by descending spectrum value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DoaEstimate {
    pub peaks: Vec<DoaPeak>,
}

impl DoaEstimate {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }
    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }
    pub fn angles(&self) -> Vec<(f64, f64)> {
        self.peaks.iter().map(|p| (p.theta, p.phi)).collect()
    }

    /// JSON with angles in radians and degrees.
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.peaks
                .iter()
                .map(|p| {
                    serde_json::json!({
                        "theta": p.theta,
                        "phi": p.phi,
                        "theta_deg": p.theta.to_degrees(),
                        "phi_deg": p.phi.to_degrees(),
                        "value": p.value,
                        "exact_null": p.exact_null,
                    })
                })
                .collect(),
        )
    }
}

/// Grid indices (i_theta, j_phi) of local maxima, by descending value.
///
/// A point must be ≥ its 8 neighbours and strictly greater than those that
/// precede it in storage order, so a flat top yields one maximum.
pub fn local_maxima(g: &SpectrumGrid) -> Vec<(usize, usize)> {
    let nt = g.thetas.len();
    let np = g.phis.len();
    let mut out = Vec::new();
    for j in 0..np {
        for i in 0..nt {
            let v = g.value(i, j);
            let own = j * nt + i;
            let mut is_max = true;
            'nb: for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let jj = j as i64 + dj;
                    if jj < 0 || jj >= np as i64 {
                        continue;
                    }
                    let mut ii = i as i64 + di;
                    if g.wraps {
                        ii = ii.rem_euclid(nt as i64);
                    } else if ii < 0 || ii >= nt as i64 {
                        continue;
                    }
                    let (ii, jj) = (ii as usize, jj as usize);
                    let w = g.value(ii, jj);
                    let before = jj * nt + ii < own;
                    if w > v || (before && w == v) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                out.push((i, j));
            }
        }
    }
    out.sort_by(|a, b| g.value(b.0, b.1).total_cmp(&g.value(a.0, a.1)));
    out
}

/// Nelder-Mead minimization in two variables. Stops when every vertex lies
/// within `tol` of the best one under `dist`.
fn nelder_mead(
    f: &dyn Fn([f64; 2]) -> f64,
    x0: [f64; 2],
    step: f64,
    tol: f64,
    max_evals: usize,
    dist: &dyn Fn(&[f64; 2], &[f64; 2]) -> f64,
) -> ([f64; 2], f64) {
    let mut s = [x0, [x0[0] + step, x0[1]], [x0[0], x0[1] + step]];
    let mut fs = [f(s[0]), f(s[1]), f(s[2])];
    let mut evals = 3;
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    while evals < max_evals {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        s = [s[idx[0]], s[idx[1]], s[idx[2]]];
        fs = [fs[idx[0]], fs[idx[1]], fs[idx[2]]];
        if dist(&s[0], &s[1]).max(dist(&s[0], &s[2])) < tol {
            break;
        }
        let c = lerp(s[0], s[1], 0.5);
        let xr = lerp(c, s[2], -1.0);
        let fr = f(xr);
        evals += 1;
        if fr < fs[0] {
            let xe = lerp(c, s[2], -2.0);
            let fe = f(xe);
            evals += 1;
            if fe < fr {
                s[2] = xe;
                fs[2] = fe;
            } else {
                s[2] = xr;
                fs[2] = fr;
            }
        } else if fr < fs[1] {
            s[2] = xr;
            fs[2] = fr;
        } else {
            let (xc, fc_ref) = if fr < fs[2] { (lerp(c, xr, 0.5), fr) } else { (lerp(c, s[2], 0.5), fs[2]) };
            let fc = f(xc);
            evals += 1;
            if fc < fc_ref {
                s[2] = xc;
                fs[2] = fc;
            } else {
                for v in 1..3 {
                    s[v] = lerp(s[0], s[v], 0.5);
                    fs[v] = f(s[v]);
                }
                evals += 2;
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| fs[a].total_cmp(&fs[b])).unwrap();
    (s[best], fs[best])
}

/// Local ascent on the log spectrum from a coarse maximum.
pub fn refine_peak(engine: &MusicEngine, theta: f64, phi: f64, step: f64, tol: f64, max_evals: usize) -> DoaPeak {
    let obj = |x: [f64; 2]| -engine.evaluate(x[0], x[1]).value.ln();
    let dist = |a: &[f64; 2], b: &[f64; 2]| angle_between(wave_vector(a[0], a[1]).as_vec(), wave_vector(b[0], b[1]).as_vec());
    let (x, _) = nelder_mead(&obj, [theta, phi], 0.5 * step, tol, max_evals, &dist);
    let (t, p) = canonical_angles(x[0], x[1]);
    let v = engine.evaluate(t, p);
    DoaPeak { theta: t, phi: p, value: v.value, exact_null: v.exact_null }
}

fn separation(a: (f64, f64), b: (f64, f64)) -> f64 {
    angle_between(wave_vector(a.0, a.1).as_vec(), wave_vector(b.0, b.1).as_vec())
}

/// Pick the M strongest well-separated maxima of a scanned spectrum and
/// refine them.
pub fn search_peaks(engine: &MusicEngine, grid: &SpectrumGrid, m: usize, opts: &DoaOptions) -> Result<DoaEstimate> {
    let threshold = opts.min_peak_ratio.map(|r| r * grid.median());
    let mut accepted: Vec<DoaPeak> = Vec::new();
    let mut refined = 0;
    for (i, j) in local_maxima(grid) {
        if accepted.len() == m || refined >= opts.max_candidates {
            break;
        }
        // peaks narrower than the grid step are undersampled, so the threshold applies after refinement
        let coarse = (grid.thetas[i], grid.phis[j]);
        if accepted.iter().any(|p| separation((p.theta, p.phi), coarse) < opts.min_separation) {
            continue;
        }
        refined += 1;
        let peak = refine_peak(engine, coarse.0, coarse.1, opts.grid.step, opts.refine_tol, opts.max_evals);
        if let Some(t) = threshold {
            if peak.value < t {
                continue;
            }
        }
        if accepted.iter().any(|p| separation((p.theta, p.phi), (peak.theta, peak.phi)) < opts.min_separation) {
            continue;
        }
        accepted.push(peak);
    }
    accepted.sort_by(|a, b| b.value.total_cmp(&a.value));
    if accepted.len() < m {
        return Err(Error::UnderDetection { wanted: m, found: accepted.iter().map(|p| (p.theta, p.phi)).collect() });
    }
    Ok(DoaEstimate { peaks: accepted })
}

/// Coarse scan plus refinement on a prepared engine.
pub fn estimate_with_engine(engine: &MusicEngine, m: usize, opts: &DoaOptions) -> Result<(DoaEstimate, SpectrumGrid)> {
    let grid = engine.scan(&opts.grid)?;
    let est = search_peaks(engine, &grid, m, opts)?;
    Ok((est, grid))
}

/// Tri-polarized DOA estimation.
pub fn estimate_doa(field: &FieldSamples, m: usize, opts: &DoaOptions) -> Result<DoaEstimate> {
    let engine = MusicEngine::tri_polarized(field, m, &opts.subspace)?;
    Ok(estimate_with_engine(&engine, m, opts)?.0)
}
