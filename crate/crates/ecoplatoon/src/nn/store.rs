//! Named parameter storage, gradient application, and checkpoints.
//!
//! Every trainable tensor lives here under a unique name (networks use
//! prefixes such as `actor/` and `critic/`). The store owns one gradient
//! buffer per parameter, applies SGD or Adam updates, performs the soft
//! target-network blend, and serializes everything to a versioned text
//! checkpoint whose float encoding round-trips bit-exactly.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::linalg::Mat;
use crate::nn::NnError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateRule {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl UpdateRule {
    pub fn sgd(lr: f64) -> Self {
        UpdateRule::Sgd { lr }
    }

    pub fn adam(lr: f64) -> Self {
        UpdateRule::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn lr(&self) -> f64 {
        match self {
            UpdateRule::Sgd { lr } | UpdateRule::Adam { lr, .. } => *lr,
        }
    }
}

#[derive(Debug, Clone)]
struct Param {
    name: String,
    value: Mat,
    grad: Mat,
    /// Adam first/second moments, allocated on first Adam step.
    moments: Option<(Mat, Mat)>,
    /// Per-parameter Adam step count; updates are selective, so bias
    /// correction cannot share one global counter.
    adam_steps: u64,
}

/// Ordered collection of named parameters. Iteration order is insertion
/// order, which makes checkpoints and soft updates deterministic.
#[derive(Debug, Clone)]
pub struct ParameterStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
    rule: UpdateRule,
}

impl ParameterStore {
    pub fn new(rule: UpdateRule) -> Self {
        ParameterStore {
            params: Vec::new(),
            index: HashMap::new(),
            rule,
        }
    }

    pub fn rule(&self) -> UpdateRule {
        self.rule
    }

    pub fn set_rule(&mut self, rule: UpdateRule) {
        self.rule = rule;
    }

    pub fn register(&mut self, name: &str, value: Mat) -> Result<(), NnError> {
        if self.index.contains_key(name) {
            return Err(NnError::DuplicateParam(name.to_string()));
        }
        if !value.is_finite() {
            return Err(NnError::NonFinite(format!("initial value of {name}")));
        }
        let grad = Mat::zeros(value.rows(), value.cols());
        self.index.insert(name.to_string(), self.params.len());
        self.params.push(Param {
            name: name.to_string(),
            value,
            grad,
            moments: None,
            adam_steps: 0,
        });
        Ok(())
    }

    fn idx(&self, name: &str) -> Result<usize, NnError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn value(&self, name: &str) -> Result<&Mat, NnError> {
        Ok(&self.params[self.idx(name)?].value)
    }

    pub fn grad(&self, name: &str) -> Result<&Mat, NnError> {
        Ok(&self.params[self.idx(name)?].grad)
    }

    /// Shifts one entry in place; used by finite-difference checks.
    pub fn nudge(&mut self, name: &str, i: usize, j: usize, delta: f64) -> Result<(), NnError> {
        let idx = self.idx(name)?;
        self.params[idx].value.add_at(i, j, delta);
        Ok(())
    }

    pub fn accumulate_grad(&mut self, name: &str, g: &Mat) -> Result<(), NnError> {
        let idx = self.idx(name)?;
        let p = &mut self.params[idx];
        if p.grad.shape() != g.shape() {
            return Err(NnError::Shape(format!(
                "gradient for {name}: expected {}x{}, found {}x{}",
                p.grad.rows(),
                p.grad.cols(),
                g.rows(),
                g.cols()
            )));
        }
        for (a, d) in p.grad.data_mut().iter_mut().zip(g.data()) {
            *a += d;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            for v in p.grad.data_mut() {
                *v = 0.0;
            }
        }
    }

    /// One optimizer step over every parameter; gradients are then cleared.
    /// Any non-finite gradient or updated value is a hard error.
    pub fn apply_update(&mut self) -> Result<(), NnError> {
        self.apply_update_where(|_| true)
    }

    /// Optimizer step restricted to parameters the predicate selects (by
    /// name); their gradients are consumed, all others are cleared too.
    /// Adam moments and bias-correction counters advance only for the
    /// selected parameters.
    pub fn apply_update_where(&mut self, select: impl Fn(&str) -> bool) -> Result<(), NnError> {
        let rule = self.rule;
        for p in &mut self.params {
            if !select(&p.name) {
                continue;
            }
            if !p.grad.is_finite() {
                return Err(NnError::NonFinite(format!("gradient of {}", p.name)));
            }
            match rule {
                UpdateRule::Sgd { lr } => {
                    let (value, grad) = (p.value.data_mut(), p.grad.data());
                    for (v, g) in value.iter_mut().zip(grad) {
                        *v -= lr * g;
                    }
                }
                UpdateRule::Adam {
                    lr,
                    beta1,
                    beta2,
                    eps,
                } => {
                    if p.moments.is_none() {
                        let (r, c) = p.value.shape();
                        p.moments = Some((Mat::zeros(r, c), Mat::zeros(r, c)));
                    }
                    p.adam_steps += 1;
                    let (m1, m2) = p.moments.as_mut().expect("just allocated");
                    let bc1 = 1.0 - beta1.powi(p.adam_steps as i32);
                    let bc2 = 1.0 - beta2.powi(p.adam_steps as i32);
                    let value = p.value.data_mut();
                    for (((v, g), m), s) in value
                        .iter_mut()
                        .zip(p.grad.data())
                        .zip(m1.data_mut())
                        .zip(m2.data_mut())
                    {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *s = beta2 * *s + (1.0 - beta2) * g * g;
                        let mhat = *m / bc1;
                        let shat = *s / bc2;
                        *v -= lr * mhat / (shat.sqrt() + eps);
                    }
                }
            }
            if !p.value.is_finite() {
                return Err(NnError::NonFinite(format!("updated value of {}", p.name)));
            }
        }
        self.zero_grads();
        Ok(())
    }

    /// Target-network blend: self <- tau * online + (1 - tau) * self.
    /// Both stores must hold the same names with the same shapes.
    pub fn soft_update_from(&mut self, online: &ParameterStore, tau: f64) -> Result<(), NnError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(NnError::Shape(format!("tau {tau} outside [0, 1]")));
        }
        if self.params.len() != online.params.len() {
            return Err(NnError::Shape(format!(
                "soft update: {} target parameters vs {} online",
                self.params.len(),
                online.params.len()
            )));
        }
        for p in &mut self.params {
            let other = online.value(&p.name)?;
            if other.shape() != p.value.shape() {
                return Err(NnError::Shape(format!(
                    "soft update {}: expected {}x{}, found {}x{}",
                    p.name,
                    p.value.rows(),
                    p.value.cols(),
                    other.rows(),
                    other.cols()
                )));
            }
            for (t, o) in p.value.data_mut().iter_mut().zip(other.data()) {
                *t = tau * o + (1.0 - tau) * *t;
            }
        }
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn shapes(&self) -> Vec<(String, usize, usize)> {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.value.rows(), p.value.cols()))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.data().len()).sum()
    }

    /// Rejects unless the store holds exactly the given names and shapes.
    pub fn validate_shapes(&self, expected: &[(String, usize, usize)]) -> Result<(), NnError> {
        if self.params.len() != expected.len() {
            return Err(NnError::Shape(format!(
                "expected {} parameters, found {}",
                expected.len(),
                self.params.len()
            )));
        }
        for (name, rows, cols) in expected {
            let value = self.value(name)?;
            if value.shape() != (*rows, *cols) {
                return Err(NnError::Shape(format!(
                    "parameter {name}: expected {rows}x{cols}, found {}x{}",
                    value.rows(),
                    value.cols()
                )));
            }
        }
        Ok(())
    }
}

/// Metadata stored alongside parameters in a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub config_hash: String,
    pub seed: u64,
    pub step: u64,
    pub ablation: String,
    /// road_length, speed_cap, accel_cap, d_max, vehicle_length.
    pub norm: [f64; 5],
}

const CHECKPOINT_MAGIC: &str = "ecoplatoon-checkpoint v1";

/// Serializes parameters and metadata. Floats use the shortest
/// representation that round-trips exactly, so save/load is lossless.
pub fn write_checkpoint(store: &ParameterStore, meta: &CheckpointMeta) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CHECKPOINT_MAGIC}");
    let _ = writeln!(out, "config_hash {}", meta.config_hash);
    let _ = writeln!(out, "seed {}", meta.seed);
    let _ = writeln!(out, "step {}", meta.step);
    let _ = writeln!(out, "ablation {}", meta.ablation);
    let norm: Vec<String> = meta.norm.iter().map(f64::to_string).collect();
    let _ = writeln!(out, "norm {}", norm.join(" "));
    let _ = writeln!(out, "params {}", store.param_count());
    for p in &store.params {
        let _ = writeln!(out, "param {} {} {}", p.name, p.value.rows(), p.value.cols());
        for i in 0..p.value.rows() {
            let row: Vec<String> = p.value.row(i).iter().map(f64::to_string).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    out
}

pub fn load_checkpoint(
    text: &str,
    rule: UpdateRule,
) -> Result<(ParameterStore, CheckpointMeta), NnError> {
    let mut lines = text.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, &str), NnError> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| NnError::Checkpoint(format!("unexpected end of file, wanted {what}")))
    };

    let (_, magic) = next("header")?;
    if magic.trim() != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint(format!(
            "not a checkpoint (header {magic:?})"
        )));
    }

    fn field<'a>(line: &'a str, key: &str, lineno: usize) -> Result<&'a str, NnError> {
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| NnError::Checkpoint(format!("line {lineno}: expected `{key} ...`")))
    }

    let (n, line) = next("config_hash")?;
    let config_hash = field(line, "config_hash", n)?.trim().to_string();
    let (n, line) = next("seed")?;
    let seed: u64 = field(line, "seed", n)?
        .trim()
        .parse()
        .map_err(|e| NnError::Checkpoint(format!("line {n}: bad seed: {e}")))?;
    let (n, line) = next("step")?;
    let step: u64 = field(line, "step", n)?
        .trim()
        .parse()
        .map_err(|e| NnError::Checkpoint(format!("line {n}: bad step: {e}")))?;
    let (n, line) = next("ablation")?;
    let ablation = field(line, "ablation", n)?.trim().to_string();
    let (n, line) = next("norm")?;
    let norm_vals: Vec<f64> = field(line, "norm", n)?
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|e| NnError::Checkpoint(format!("line {n}: bad norm value: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if norm_vals.len() != 5 {
        return Err(NnError::Checkpoint(format!(
            "line {n}: norm needs 5 values, found {}",
            norm_vals.len()
        )));
    }
    let mut norm = [0.0; 5];
    norm.copy_from_slice(&norm_vals);

    let (n, line) = next("params")?;
    let count: usize = field(line, "params", n)?
        .trim()
        .parse()
        .map_err(|e| NnError::Checkpoint(format!("line {n}: bad params count: {e}")))?;

    let mut store = ParameterStore::new(rule);
    for _ in 0..count {
        let (n, line) = next("param header")?;
        let rest = field(line, "param", n)?;
        let mut parts = rest.split_whitespace();
        let name = parts
            .next()
            .ok_or_else(|| NnError::Checkpoint(format!("line {n}: missing parameter name")))?
            .to_string();
        let rows: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| NnError::Checkpoint(format!("line {n}: bad row count")))?;
        let cols: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| NnError::Checkpoint(format!("line {n}: bad column count")))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (n, line) = next("parameter row")?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|e| NnError::Checkpoint(format!("line {n}: bad value: {e}")))
                })
                .collect::<Result<_, _>>()?;
            if row.len() != cols {
                return Err(NnError::Checkpoint(format!(
                    "line {n}: expected {cols} values, found {}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        store.register(&name, Mat::from_vec(rows, cols, data))?;
    }

    Ok((
        store,
        CheckpointMeta {
            config_hash,
            seed,
            step,
            ablation,
            norm,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_store() -> ParameterStore {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = ParameterStore::new(UpdateRule::sgd(0.5));
        for (name, r, c) in [("actor/w0", 3, 4), ("actor/b0", 1, 4), ("critic/w0", 5, 1)] {
            let m = Mat::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-2.0..2.0)).collect());
            store.register(name, m).unwrap();
        }
        store
    }

    #[test]
    fn sgd_moves_against_the_gradient() {
        let mut store = ParameterStore::new(UpdateRule::sgd(0.5));
        store.register("p", Mat::filled(1, 2, 1.0)).unwrap();
        store
            .accumulate_grad("p", &Mat::from_vec(1, 2, vec![2.0, -4.0]))
            .unwrap();
        store.apply_update().unwrap();
        let v = store.value("p").unwrap();
        assert_eq!(v.get(0, 0), 0.0);
        assert_eq!(v.get(0, 1), 3.0);
        assert_eq!(store.grad("p").unwrap().max_abs(), 0.0);
    }

    #[test]
    fn adam_first_step_moves_by_lr_in_sign_direction() {
        // With bias correction, step 1 gives mhat/sqrt(shat) = sign(g).
        let mut store = ParameterStore::new(UpdateRule::adam(0.01));
        store.register("p", Mat::filled(1, 2, 0.0)).unwrap();
        store
            .accumulate_grad("p", &Mat::from_vec(1, 2, vec![3.0, -0.5]))
            .unwrap();
        store.apply_update().unwrap();
        let v = store.value("p").unwrap();
        assert!((v.get(0, 0) + 0.01).abs() < 1e-8);
        assert!((v.get(0, 1) - 0.01).abs() < 1e-8);
    }

    #[test]
    fn filtered_update_leaves_other_parameters_untouched() {
        // Even under Adam with accumulated momentum, an unselected
        // parameter must not move.
        let mut store = ParameterStore::new(UpdateRule::adam(0.1));
        store.register("actor/p", Mat::filled(1, 1, 1.0)).unwrap();
        store.register("critic/p", Mat::filled(1, 1, 1.0)).unwrap();
        for _ in 0..3 {
            store.accumulate_grad("actor/p", &Mat::filled(1, 1, 1.0)).unwrap();
            store.accumulate_grad("critic/p", &Mat::filled(1, 1, 1.0)).unwrap();
            store
                .apply_update_where(|name| name.starts_with("actor/"))
                .unwrap();
        }
        let actor = store.value("actor/p").unwrap().get(0, 0);
        let critic = store.value("critic/p").unwrap().get(0, 0);
        assert!(actor < 1.0, "selected parameter moved: {actor}");
        assert_eq!(critic, 1.0, "unselected parameter must stay put");
        // Unselected gradients were still cleared.
        assert_eq!(store.grad("critic/p").unwrap().get(0, 0), 0.0);
    }

    #[test]
    fn duplicate_and_unknown_names_are_errors() {
        let mut store = sample_store();
        assert!(matches!(
            store.register("actor/w0", Mat::zeros(1, 1)),
            Err(NnError::DuplicateParam(_))
        ));
        assert!(matches!(
            store.value("nope"),
            Err(NnError::UnknownParam(_))
        ));
    }

    #[test]
    fn non_finite_gradient_is_a_hard_error() {
        let mut store = ParameterStore::new(UpdateRule::sgd(0.1));
        store.register("p", Mat::filled(1, 1, 1.0)).unwrap();
        store
            .accumulate_grad("p", &Mat::from_vec(1, 1, vec![f64::INFINITY]))
            .unwrap();
        assert!(matches!(store.apply_update(), Err(NnError::NonFinite(_))));
    }

    #[test]
    fn soft_update_converges_geometrically() {
        // Target starts at 0, online fixed at 1: after k blends the target
        // is 1 - (1 - tau)^k.
        let tau = 0.075;
        let mut online = ParameterStore::new(UpdateRule::sgd(0.1));
        online.register("p", Mat::filled(2, 2, 1.0)).unwrap();
        let mut target = ParameterStore::new(UpdateRule::sgd(0.1));
        target.register("p", Mat::filled(2, 2, 0.0)).unwrap();
        for k in 1..=20 {
            target.soft_update_from(&online, tau).unwrap();
            let expected = 1.0 - (1.0 - tau).powi(k);
            let got = target.value("p").unwrap().get(0, 0);
            assert!((got - expected).abs() < 1e-12, "step {k}: {got} vs {expected}");
        }
    }

    #[test]
    fn soft_update_rejects_mismatched_stores() {
        let mut target = sample_store();
        let mut online = ParameterStore::new(UpdateRule::sgd(0.1));
        online.register("actor/w0", Mat::zeros(3, 4)).unwrap();
        assert!(target.soft_update_from(&online, 0.1).is_err());
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let store = sample_store();
        let meta = CheckpointMeta {
            config_hash: "deadbeef".into(),
            seed: 42,
            step: 1234,
            ablation: "nstw".into(),
            norm: [25000.0, 40.0, 4.5, 100.0, 5.0],
        };
        let text = write_checkpoint(&store, &meta);
        let (loaded, got_meta) = load_checkpoint(&text, UpdateRule::sgd(0.5)).unwrap();
        assert_eq!(got_meta, meta);
        assert_eq!(loaded.shapes(), store.shapes());
        for name in store.names() {
            let a = store.value(name).unwrap();
            let b = loaded.value(name).unwrap();
            assert_eq!(a.data(), b.data(), "values of {name} changed");
        }
        // Re-serialization is byte-identical.
        assert_eq!(write_checkpoint(&loaded, &got_meta), text);
    }

    #[test]
    fn checkpoint_shape_validation_names_the_offender() {
        let store = sample_store();
        let mut expected = store.shapes();
        expected[1].1 = 7;
        let err = store.validate_shapes(&expected).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("actor/b0"), "message was {msg}");
        assert!(msg.contains('7'), "message was {msg}");
    }

    #[test]
    fn checkpoint_rejects_foreign_and_truncated_input() {
        assert!(load_checkpoint("something else\n", UpdateRule::sgd(0.1)).is_err());
        let store = sample_store();
        let meta = CheckpointMeta {
            config_hash: "x".into(),
            seed: 0,
            step: 0,
            ablation: "idm".into(),
            norm: [1.0; 5],
        };
        let text = write_checkpoint(&store, &meta);
        let cut: String = text.lines().take(9).map(|l| format!("{l}\n")).collect();
        assert!(load_checkpoint(&cut, UpdateRule::sgd(0.1)).is_err());
    }
}
