//! Probability machinery for the attribute heads: categorical label
//! distributions, K-means codebooks for coarse prediction, and the
//! discretized mixture-of-logistics likelihood with its sampler.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};

/// Default bin half-width: 256 bins over [-1,1].
pub const DEFAULT_BIN_HALF_WIDTH: f64 = 1.0 / 255.0;

/// Log-scales below this are clamped; prevents degenerate spikes.
pub const LOG_SCALE_FLOOR: f64 = -7.0;

/// Scalar kernels shared by the plain evaluators and the tape op.
pub mod kernels {
    use super::LOG_SCALE_FLOOR;

    pub fn sigmoid(x: f64) -> f64 {
        if x >= 0.0 {
            1.0 / (1.0 + (-x).exp())
        } else {
            let e = x.exp();
            e / (1.0 + e)
        }
    }

    pub fn softplus(x: f64) -> f64 {
        if x > 30.0 {
            x
        } else if x < -30.0 {
            x.exp()
        } else {
            x.exp().ln_1p()
        }
    }

    /// log of the standard logistic pdf.
    fn log_pdf(u: f64) -> f64 {
        -u - 2.0 * softplus(-u)
    }

    /// Discretized logistic log bin mass for a single dimension/component,
    /// together with its gradients wrt the location and the (unclamped)
    /// log-scale.
    ///
    /// The bin is [x-h, x+h]; bins touching the data boundary (|x| >= 1-h)
    /// extend to +-infinity. When the CDF difference underflows the mass
    /// falls back to pdf * 2h.
    pub fn disc_logistic_logmass_grad(x: f64, mu: f64, log_s: f64, h: f64) -> (f64, f64, f64) {
        let clamped = log_s < LOG_SCALE_FLOOR;
        let ls = log_s.max(LOG_SCALE_FLOOR);
        let inv_s = (-ls).exp();
        let m = (x - mu) * inv_s;
        let a = m + h * inv_s;
        let b = m - h * inv_s;

        if x >= 1.0 - h {
            // Right edge bin: mass = 1 - sigma(b).
            let lp = -softplus(b);
            let d_mu = sigmoid(b) * inv_s;
            let d_ls = if clamped { 0.0 } else { sigmoid(b) * b };
            return (lp, d_mu, d_ls);
        }
        if x <= -1.0 + h {
            // Left edge bin: mass = sigma(a).
            let lp = -softplus(-a);
            let d_mu = -sigmoid(-a) * inv_s;
            let d_ls = if clamped { 0.0 } else { -sigmoid(-a) * a };
            return (lp, d_mu, d_ls);
        }

        let log_cdf_a = -softplus(-a);
        let log_cdf_b = -softplus(-b);
        let delta = log_cdf_a - log_cdf_b; // >= 0
        if delta > 1e-10 {
            let lp = log_cdf_b + delta.exp_m1().ln();
            let r_a = (log_pdf(a) - lp).exp();
            let r_b = (log_pdf(b) - lp).exp();
            let d_mu = -inv_s * (r_a - r_b);
            let d_ls = if clamped { 0.0 } else { -(a * r_a - b * r_b) };
            (lp, d_mu, d_ls)
        } else {
            // CDF difference underflows: approximate with pdf * 2h.
            let lp = log_pdf(m) + (2.0 * h).ln() - ls;
            let slope = 1.0 - 2.0 * sigmoid(m);
            let d_mu = -slope * inv_s;
            let d_ls = if clamped { 0.0 } else { slope * -m - 1.0 };
            (lp, d_mu, d_ls)
        }
    }

    pub fn disc_logistic_logmass(x: f64, mu: f64, log_s: f64, h: f64) -> f64 {
        disc_logistic_logmass_grad(x, mu, log_s, h).0
    }
}

/// K-means codebook used by the coarse attribute heads.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClusterCodebook {
    pub attribute: String,
    /// k rows of d-dimensional centers.
    pub centers: Vec<Vec<f64>>,
}

impl ClusterCodebook {
    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, |c| c.len())
    }

    /// Nearest-center assignment; ties resolve to the lowest index.
    pub fn assign(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centers.iter().enumerate() {
            let d: f64 = c.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_REL_TOL: f64 = 1e-6;

/// Lloyd's algorithm with k-means++ initialization. Deterministic given the
/// generator; runs 100 iterations or until the relative inertia change
/// drops below 1e-6.
pub fn fit_kmeans(
    values: ArrayView2<'_, f64>,
    k: usize,
    attribute: &str,
    rng: &mut impl Rng,
) -> Result<ClusterCodebook> {
    let (m, d) = values.dim();
    if m < k {
        return Err(Error::InvalidArgument(format!(
            "k-means needs at least k={k} samples, got {m}"
        )));
    }

    let dist2 = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
    };

    // k-means++ seeding.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.gen_range(0..m);
    centers.push(values.row(first).to_vec());
    let mut d2: Vec<f64> = (0..m)
        .map(|i| dist2(values.row(i).as_slice().unwrap(), &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let chosen = if total <= 0.0 {
            rng.gen_range(0..m)
        } else {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = m - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc >= target {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centers.push(values.row(chosen).to_vec());
        let newest = centers.last().unwrap();
        for i in 0..m {
            let d = dist2(values.row(i).as_slice().unwrap(), newest);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }

    let mut assignment = vec![0usize; m];
    let mut prev_inertia = f64::INFINITY;
    for _ in 0..KMEANS_MAX_ITERS {
        let mut inertia = 0.0;
        for i in 0..m {
            let row = values.row(i);
            let row = row.as_slice().unwrap();
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = dist2(row, center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assignment[i] = best;
            inertia += best_d;
        }

        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for i in 0..m {
            counts[assignment[i]] += 1;
            for (s, v) in sums[assignment[i]].iter_mut().zip(values.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from its
                // current center.
                let far = (0..m)
                    .max_by(|&a, &b| {
                        let da = dist2(values.row(a).as_slice().unwrap(), &centers[assignment[a]]);
                        let db = dist2(values.row(b).as_slice().unwrap(), &centers[assignment[b]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centers[c] = values.row(far).to_vec();
                assignment[far] = c;
            } else {
                for (j, s) in sums[c].iter().enumerate() {
                    centers[c][j] = s / counts[c] as f64;
                }
            }
        }

        if prev_inertia.is_finite() {
            let rel = (prev_inertia - inertia).abs() / prev_inertia.max(1e-300);
            if rel < KMEANS_REL_TOL {
                break;
            }
        }
        prev_inertia = inertia;
    }

    if centers.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "k-means produced non-finite centers".into(),
        ));
    }
    Ok(ClusterCodebook {
        attribute: attribute.to_string(),
        centers,
    })
}

/// Parameters of one K-component logistic mixture over d dimensions.
#[derive(Debug, Clone)]
pub struct MixtureOfLogisticsParams {
    /// K mixing logits.
    pub mixing_logits: Vec<f64>,
    /// [d,K] component locations.
    pub locations: Array2<f64>,
    /// [d,K] component log-scales (clamped to >= -7 at evaluation).
    pub log_scales: Array2<f64>,
}

impl MixtureOfLogisticsParams {
    pub fn components(&self) -> usize {
        self.mixing_logits.len()
    }

    pub fn dim(&self) -> usize {
        self.locations.nrows()
    }

    /// Split a flat head output of width (1 + 2d) * K into parameters:
    /// layout [K mixing | d*K locations | d*K log-scales], both matrices
    /// row-major by dimension.
    pub fn from_flat(flat: &[f64], dim: usize, k: usize) -> Self {
        assert_eq!(flat.len(), (1 + 2 * dim) * k);
        let mixing_logits = flat[..k].to_vec();
        let locations =
            Array2::from_shape_vec((dim, k), flat[k..k + dim * k].to_vec()).unwrap();
        let log_scales =
            Array2::from_shape_vec((dim, k), flat[k + dim * k..].to_vec()).unwrap();
        MixtureOfLogisticsParams {
            mixing_logits,
            locations,
            log_scales,
        }
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::MIN, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - lse).collect()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    if max == f64::MIN {
        return f64::MIN;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-probability of the discretized mixture at `x` (componentwise bins of
/// half-width `half_bin`). Inputs are clamped to [-1,1].
pub fn mol_log_prob(params: &MixtureOfLogisticsParams, x: &[f64], half_bin: f64) -> f64 {
    let d = params.dim();
    let k = params.components();
    assert_eq!(x.len(), d);
    let logmix = log_softmax(&params.mixing_logits);
    let mut per_component = logmix;
    for i in 0..d {
        let xi = x[i].clamp(-1.0, 1.0);
        for (j, lp) in per_component.iter_mut().enumerate().take(k) {
            *lp += kernels::disc_logistic_logmass(
                xi,
                params.locations[(i, j)],
                params.log_scales[(i, j)],
                half_bin,
            );
        }
    }
    log_sum_exp(&per_component)
}

/// Tape version of [`mol_log_prob`] for training; `pi` is [K], `mu` and
/// `log_s` are [d,K].
pub fn mol_log_prob_on_tape(
    tape: &mut Tape,
    pi: Var,
    mu: Var,
    log_s: Var,
    x: &[f64],
    half_bin: f64,
) -> Var {
    let clamped: Vec<f64> = x.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    let logmass = tape.disc_logistic_logmass(mu, log_s, &clamped, half_bin);
    let per_component = tape.sum_axis0(logmass);
    let logmix = tape.log_softmax(pi);
    let combined = tape.add(per_component, logmix);
    tape.log_sum_exp(combined)
}

/// Draw one d-vector: pick a component from softmax(pi), then per dimension
/// x = mu + s * (ln u - ln(1-u)), clamped to [-1,1].
pub fn mol_sample(params: &MixtureOfLogisticsParams, rng: &mut impl Rng) -> Vec<f64> {
    let component = categorical_sample(&params.mixing_logits, rng, 1.0);
    let d = params.dim();
    let mut out = Vec::with_capacity(d);
    for i in 0..d {
        let mu = params.locations[(i, component)];
        let s = params.log_scales[(i, component)].max(LOG_SCALE_FLOOR).exp();
        let u = rng.gen::<f64>().clamp(1e-12, 1.0 - 1e-12);
        let sample = mu + s * (u.ln() - (1.0 - u).ln());
        out.push(sample.clamp(-1.0, 1.0));
    }
    out
}

/// Negative log-likelihood of `label` under softmax(logits).
pub fn categorical_nll(logits: &[f64], label: usize) -> f64 {
    assert!(label < logits.len());
    -log_softmax(logits)[label]
}

/// Sample a label; `temperature` divides the logits first. Temperatures at
/// or below 1e-9 collapse to argmax (ties to the lowest index).
pub fn categorical_sample(logits: &[f64], rng: &mut impl Rng, temperature: f64) -> usize {
    if temperature <= 1e-9 {
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        return best;
    }
    let scaled: Vec<f64> = logits.iter().map(|v| v / temperature).collect();
    let log_probs = log_softmax(&scaled);
    let target = rng.gen::<f64>();
    let mut acc = 0.0;
    for (i, lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if acc >= target {
            return i;
        }
    }
    logits.len() - 1
}

/// Bin centers of the discretized grid: -1 + 2i/255 for i in 0..256 when
/// half_bin = 1/255.
pub fn bin_centers(half_bin: f64) -> Vec<f64> {
    let n = (1.0 / half_bin).round() as usize + 1;
    (0..n).map(|i| -1.0 + 2.0 * half_bin * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::{check, ParamStore, Tape};
    use ndarray::{arr2, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_params(d: usize, k: usize, rng: &mut ChaCha8Rng) -> MixtureOfLogisticsParams {
        MixtureOfLogisticsParams {
            mixing_logits: (0..k).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect(),
            locations: Array2::from_shape_fn((d, k), |_| rng.gen::<f64>() * 2.0 - 1.0),
            log_scales: Array2::from_shape_fn((d, k), |_| rng.gen::<f64>() * 5.0 - 5.5),
        }
    }

    #[test]
    fn bin_masses_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = DEFAULT_BIN_HALF_WIDTH;
        let centers = bin_centers(h);
        assert_eq!(centers.len(), 256);
        for _ in 0..20 {
            let params = random_params(1, 4, &mut rng);
            let total: f64 = centers
                .iter()
                .map(|&c| mol_log_prob(&params, &[c], h).exp())
                .sum();
            assert!(
                (total - 1.0).abs() < 1e-6,
                "bin masses sum to {total}, not 1"
            );
        }
    }

    #[test]
    fn multi_dim_bin_masses_sum_to_one() {
        // With d=2 the product measure over the 256x256 grid must also
        // normalize; checked on a coarser grid via the 1-D marginals of a
        // single shared component (independence within a component).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = DEFAULT_BIN_HALF_WIDTH;
        let params = random_params(2, 3, &mut rng);
        // Sum over the full 2-D grid, using the factorization per component.
        let centers = bin_centers(h);
        let logmix = log_softmax(&params.mixing_logits);
        let mut total = 0.0;
        for (j, lm) in logmix.iter().enumerate() {
            let mut per_dim = [0.0f64; 2];
            for (i, acc) in per_dim.iter_mut().enumerate() {
                *acc = centers
                    .iter()
                    .map(|&c| {
                        kernels::disc_logistic_logmass(
                            c,
                            params.locations[(i, j)],
                            params.log_scales[(i, j)],
                            h,
                        )
                        .exp()
                    })
                    .sum();
            }
            total += lm.exp() * per_dim[0] * per_dim[1];
        }
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn broad_scale_is_nearly_uniform_on_interior_bins() {
        let params = MixtureOfLogisticsParams {
            mixing_logits: vec![0.0],
            locations: Array2::zeros((1, 1)),
            log_scales: Array2::from_elem((1, 1), 10.0f64.ln()),
        };
        let h = DEFAULT_BIN_HALF_WIDTH;
        // 2h * pdf(0) with pdf of a logistic at its center = 1/(4s).
        let reference = 2.0 * h / 40.0;
        for &c in bin_centers(h).iter().skip(1).take(254) {
            let mass = mol_log_prob(&params, &[c], h).exp();
            assert!(
                (mass - reference).abs() / reference < 0.1,
                "bin at {c} has mass {mass}, expected ~{reference}"
            );
        }
    }

    #[test]
    fn symmetric_params_give_symmetric_log_prob() {
        let params = MixtureOfLogisticsParams {
            mixing_logits: vec![0.3, 0.3],
            locations: arr2(&[[-0.4, 0.4], [-0.1, 0.1]]),
            log_scales: arr2(&[[-2.0, -2.0], [-1.5, -1.5]]),
        };
        let h = DEFAULT_BIN_HALF_WIDTH;
        for x in [[0.2, 0.7], [0.05, -0.3], [0.9, 0.03]] {
            let neg = [-x[0], -x[1]];
            let a = mol_log_prob(&params, &x, h);
            let b = mol_log_prob(&params, &neg, h);
            assert!((a - b).abs() < 1e-9, "asymmetry: {a} vs {b}");
        }
    }

    #[test]
    fn tape_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = DEFAULT_BIN_HALF_WIDTH;
        for trial in 0..20 {
            let d = 1 + (trial % 3);
            let k = 2 + (trial % 4);
            let mut store = ParamStore::new();
            let pi = store.add(
                "pi",
                ndarray::ArrayD::from_shape_fn(ndarray::IxDyn(&[k]), |_| {
                    rng.gen::<f64>() * 2.0 - 1.0
                }),
            );
            let mu = store.add(
                "mu",
                ndarray::ArrayD::from_shape_fn(ndarray::IxDyn(&[d, k]), |_| {
                    rng.gen::<f64>() * 2.0 - 1.0
                }),
            );
            let ls = store.add(
                "ls",
                ndarray::ArrayD::from_shape_fn(ndarray::IxDyn(&[d, k]), |_| {
                    rng.gen::<f64>() * 4.0 - 4.5
                }),
            );
            let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 1.8 - 0.9).collect();

            let eval = |store: &ParamStore| -> f64 {
                let mut tape = Tape::new();
                let piv = tape.param(store, pi);
                let muv = tape.param(store, mu);
                let lsv = tape.param(store, ls);
                let lp = mol_log_prob_on_tape(&mut tape, piv, muv, lsv, &x, h);
                tape.scalar_value(lp)
            };

            let mut tape = Tape::new();
            let piv = tape.param(&store, pi);
            let muv = tape.param(&store, mu);
            let lsv = tape.param(&store, ls);
            let lp = mol_log_prob_on_tape(&mut tape, piv, muv, lsv, &x, h);
            let mut grads = store.zero_grads();
            tape.backward(lp, &mut grads);

            for pid in [pi, mu, ls] {
                for flat in 0..store.value(pid).len() {
                    let fd = check::central_difference(&mut store, pid, flat, 1e-5, &eval);
                    let an = grads[pid].as_slice().unwrap()[flat];
                    let err = check::relative_error(fd, an);
                    assert!(
                        err < 1e-4,
                        "trial {trial} {}[{flat}]: fd={fd} an={an} err={err}",
                        store.name(pid)
                    );
                }
            }
        }
    }

    #[test]
    fn collapsed_mixture_samples_near_location() {
        let params = MixtureOfLogisticsParams {
            mixing_logits: vec![100.0, 0.0],
            locations: arr2(&[[0.25, -0.9]]),
            log_scales: arr2(&[[-7.5, -1.0]]),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let x = mol_sample(&params, &mut rng);
            assert!((x[0] - 0.25).abs() < 1e-2, "sample {x:?} strayed");
        }
    }

    #[test]
    fn sample_mean_matches_mixture_mean() {
        let params = MixtureOfLogisticsParams {
            mixing_logits: vec![0.0, 1.0, -0.5],
            locations: arr2(&[[-0.4, 0.1, 0.5]]),
            log_scales: arr2(&[[-3.0, -2.5, -3.5]]),
        };
        let weights: Vec<f64> = log_softmax(&params.mixing_logits)
            .iter()
            .map(|v| v.exp())
            .collect();
        let mean: f64 = weights
            .iter()
            .zip(params.locations.row(0))
            .map(|(w, m)| w * m)
            .sum();
        let var: f64 = weights
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let s = params.log_scales[(0, j)].exp();
                let m = params.locations[(0, j)];
                w * (s * s * std::f64::consts::PI.powi(2) / 3.0 + m * m)
            })
            .sum::<f64>()
            - mean * mean;
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sum: f64 = (0..n).map(|_| mol_sample(&params, &mut rng)[0]).sum();
        let empirical = sum / n as f64;
        let sigma = (var / n as f64).sqrt();
        assert!(
            (empirical - mean).abs() < 4.0 * sigma,
            "mean {empirical} vs {mean} (4 sigma = {})",
            4.0 * sigma
        );
    }

    #[test]
    fn component_frequencies_match_mixing_weights() {
        // Well-separated locations identify the component of each draw.
        let params = MixtureOfLogisticsParams {
            mixing_logits: vec![0.7, -0.3, 0.1],
            locations: arr2(&[[-0.8, 0.0, 0.8]]),
            log_scales: arr2(&[[-5.0, -5.0, -5.0]]),
        };
        let weights: Vec<f64> = log_softmax(&params.mixing_logits)
            .iter()
            .map(|v| v.exp())
            .collect();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let x = mol_sample(&params, &mut rng)[0];
            let nearest = [-0.8f64, 0.0, 0.8]
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    (a.1 - x).abs().partial_cmp(&(b.1 - x).abs()).unwrap()
                })
                .unwrap()
                .0;
            counts[nearest] += 1;
        }
        for j in 0..3 {
            let expected = weights[j] * n as f64;
            let sigma = (n as f64 * weights[j] * (1.0 - weights[j])).sqrt();
            assert!(
                (counts[j] as f64 - expected).abs() < 4.0 * sigma,
                "component {j}: {} vs {expected}",
                counts[j]
            );
        }
    }

    #[test]
    fn categorical_basics() {
        assert!((categorical_nll(&[0.0; 4], 1) - 4.0f64.ln()).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let one_hot = [0.0, 1000.0, 0.0];
        for _ in 0..100 {
            assert_eq!(categorical_sample(&one_hot, &mut rng, 1.0), 1);
        }
        // temperature -> 0 gives argmax deterministically
        assert_eq!(categorical_sample(&[0.3, 0.1, 0.9], &mut rng, 0.0), 2);
    }

    #[test]
    fn high_temperature_flattens_to_uniform() {
        let logits = [3.0, -1.0, 0.5, 2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let n = 40_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[categorical_sample(&logits, &mut rng, 1e9)] += 1;
        }
        let p = 0.25;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in &counts {
            assert!((c as f64 - n as f64 * p).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn kmeans_exact_fit_and_degenerate_duplicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        // 20 distinct points, k=20: centers are the points, inertia 0.
        let points: Vec<[f64; 2]> = (0..20)
            .map(|i| [i as f64, (i * i) as f64 * 0.01])
            .collect();
        let data = Array2::from_shape_fn((20, 2), |(i, j)| points[i][j]);
        let book = fit_kmeans(data.view(), 20, "test", &mut rng).unwrap();
        for p in &points {
            let c = &book.centers[book.assign(p)];
            assert!((c[0] - p[0]).abs() < 1e-12 && (c[1] - p[1]).abs() < 1e-12);
        }

        // 1000 copies of one point, k=2: both centers collapse onto it.
        let data = Array2::from_elem((1000, 3), 0.42);
        let book = fit_kmeans(data.view(), 2, "dup", &mut rng).unwrap();
        for c in &book.centers {
            for &v in c {
                assert!((v - 0.42).abs() < 1e-12);
            }
        }

        assert!(fit_kmeans(Array2::zeros((3, 2)).view(), 5, "small", &mut rng).is_err());
    }

    #[test]
    fn kmeans_recovers_separated_gaussian_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut data = Vec::new();
        let normal = |rng: &mut ChaCha8Rng| -> f64 {
            // Box-Muller from two uniforms.
            let u1: f64 = rng.gen::<f64>().max(1e-12);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        for _ in 0..1000 {
            data.push([-2.0 + 0.2 * normal(&mut rng), -2.0 + 0.2 * normal(&mut rng)]);
        }
        for _ in 0..1000 {
            data.push([2.0 + 0.2 * normal(&mut rng), 2.0 + 0.2 * normal(&mut rng)]);
        }
        let arr = Array2::from_shape_fn((2000, 2), |(i, j)| data[i][j]);
        let book = fit_kmeans(arr.view(), 2, "modes", &mut rng).unwrap();
        let mut found_neg = false;
        let mut found_pos = false;
        for c in &book.centers {
            if (c[0] + 2.0).abs() < 0.1 && (c[1] + 2.0).abs() < 0.1 {
                found_neg = true;
            }
            if (c[0] - 2.0).abs() < 0.1 && (c[1] - 2.0).abs() < 0.1 {
                found_pos = true;
            }
        }
        assert!(found_neg && found_pos, "centers: {:?}", book.centers);
    }

    #[test]
    fn kmeans_is_deterministic_given_seed() {
        let data = Array2::from_shape_fn((200, 3), |(i, j)| ((i * 7 + j * 13) % 31) as f64 * 0.1);
        let a = fit_kmeans(data.view(), 8, "a", &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = fit_kmeans(data.view(), 8, "a", &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a, b);
    }
}
