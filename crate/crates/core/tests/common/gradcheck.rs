//! Central-difference checks of the analytic gradients.

use gossiprec::model::gmf::{GmfConfig, GmfModel, ITEM_EMBEDDINGS, OUTPUT_BIAS, OUTPUT_WEIGHTS};
use gossiprec::model::prmeg::{PrmegConfig, PrmegModel, Row, PREF_LOC_EMBEDDINGS, SEQ_EMBEDDINGS};
use gossiprec::model::ItemId;
use gossiprec::params::ParamVector;
use gossiprec::rng::SimRng;
use rand::{Rng, SeedableRng};

const H: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;

fn uniform(rng: &mut SimRng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// `||a - n|| / max(||a||, ||n||)`, or the absolute gap when both vanish.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale < 1e-9 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

/// Central differences of `f` over every coordinate of `shared` and `user`.
pub fn numeric_grad(
    shared: &ParamVector,
    user: &[f64],
    f: impl Fn(&ParamVector, &[f64]) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut s = shared.clone();
    let mut shared_grad = vec![0.0; shared.len()];
    for i in 0..shared.len() {
        let x = s.values()[i];
        s.values_mut()[i] = x + H;
        let up = f(&s, user);
        s.values_mut()[i] = x - H;
        let down = f(&s, user);
        s.values_mut()[i] = x;
        shared_grad[i] = (up - down) / (2.0 * H);
    }
    let mut u = user.to_vec();
    let mut user_grad = vec![0.0; user.len()];
    for i in 0..user.len() {
        let x = u[i];
        u[i] = x + H;
        let up = f(shared, &u);
        u[i] = x - H;
        let down = f(shared, &u);
        u[i] = x;
        user_grad[i] = (up - down) / (2.0 * H);
    }
    (shared_grad, user_grad)
}

/// Largest relative error of the GMF loss gradient over `cases` random
/// models, inputs and labels.
pub fn check_gmf_gradients(cases: usize, seed: u64) -> Result<f64, String> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let dim = rng.gen_range(1..=24);
        let items = rng.gen_range(1..=12);
        let model = GmfModel::new(
            items,
            GmfConfig {
                dim,
                ..GmfConfig::default()
            },
        );
        let mut shared = model.layout();
        let n = shared.len();
        shared.values_mut().copy_from_slice(&uniform(&mut rng, n, 1.0));
        let user = uniform(&mut rng, dim, 1.0);
        let item = rng.gen_range(0..items) as ItemId;
        let label = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };

        let grad = model.loss_grad(&shared, &user, item, label).map_err(|e| e.to_string())?;
        let mut analytic = vec![0.0; n];
        let items_off = shared.offset_of(ITEM_EMBEDDINGS).unwrap();
        let row = items_off + item as usize * dim;
        analytic[row..row + dim].copy_from_slice(&grad.item);
        let h_off = shared.offset_of(OUTPUT_WEIGHTS).unwrap();
        analytic[h_off..h_off + dim].copy_from_slice(&grad.output_weights);
        analytic[shared.offset_of(OUTPUT_BIAS).unwrap()] = grad.output_bias;

        let (num_shared, num_user) = numeric_grad(&shared, &user, |s, u| {
            model.loss_grad(s, u, item, label).unwrap().loss
        });
        let e = rel_error(&analytic, &num_shared).max(rel_error(&grad.user, &num_user));
        if e > GRAD_TOL {
            return Err(format!("GMF case {case}: gradient off by {e:e}"));
        }
        worst = worst.max(e);
    }
    Ok(worst)
}

fn prmeg_analytic(model: &PrmegModel, shared: &ParamVector, rows: &[(Row, Vec<f64>)]) -> (Vec<f64>, Vec<f64>) {
    let d = model.config.dim;
    let seq = shared.offset_of(SEQ_EMBEDDINGS).unwrap();
    let pref = shared.offset_of(PREF_LOC_EMBEDDINGS).unwrap();
    let mut s = vec![0.0; shared.len()];
    let mut u = vec![0.0; d];
    for (row, g) in rows {
        let target = match *row {
            Row::Seq(l) => &mut s[seq + l as usize * d..seq + (l as usize + 1) * d],
            Row::PrefLoc(l) => &mut s[pref + l as usize * d..pref + (l as usize + 1) * d],
            Row::User => &mut u[..],
        };
        for (t, x) in target.iter_mut().zip(g) {
            *t += x;
        }
    }
    (s, u)
}

/// Largest relative error of the PRME-G pairwise objective gradient. Every
/// fourth case has no previous location; geographic distances fall inside
/// and outside the tau radius about equally often.
pub fn check_prmeg_gradients(cases: usize, seed: u64) -> Result<f64, String> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let dim = rng.gen_range(1..=16);
        let locs = rng.gen_range(2..=10);
        let model = PrmegModel::new(
            locs,
            PrmegConfig {
                dim,
                mix_weight: rng.gen_range(0.0..1.0),
                tau_km: 1.0,
                ..PrmegConfig::default()
            },
        );
        let mut shared = model.layout();
        let n = shared.len();
        shared.values_mut().copy_from_slice(&uniform(&mut rng, n, 0.5));
        let user = uniform(&mut rng, dim, 0.5);
        let prev = if case % 4 == 0 {
            None
        } else {
            Some(rng.gen_range(0..locs) as ItemId)
        };
        let pos = rng.gen_range(0..locs) as ItemId;
        let neg = (pos + rng.gen_range(1..locs as ItemId)) % locs as ItemId;
        let geo = |rng: &mut SimRng| {
            if rng.gen_bool(0.5) {
                rng.gen_range(0.0..1.0)
            } else {
                rng.gen_range(1.5..20.0)
            }
        };
        let (geo_pos, geo_neg) = (geo(&mut rng), geo(&mut rng));

        let grad = model
            .log_sigmoid_grad(&shared, &user, prev, pos, neg, geo_pos, geo_neg)
            .map_err(|e| e.to_string())?;
        let (analytic_shared, analytic_user) = prmeg_analytic(&model, &shared, &grad.rows);
        let (num_shared, num_user) = numeric_grad(&shared, &user, |s, u| {
            model
                .log_sigmoid_grad(s, u, prev, pos, neg, geo_pos, geo_neg)
                .unwrap()
                .objective
        });
        let e = rel_error(&analytic_shared, &num_shared).max(rel_error(&analytic_user, &num_user));
        if e > GRAD_TOL {
            return Err(format!("PRME-G case {case}: gradient off by {e:e}"));
        }
        worst = worst.max(e);
    }
    Ok(worst)
}
