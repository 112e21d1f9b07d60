//! Central finite-difference verification of analytic gradients.
//!
//! Used by the test suites to certify every layer and loss: rebuild the
//! forward pass under elementwise parameter nudges and compare the
//! numeric slope against the gradient a backward pass produced.

use crate::nn::store::ParameterStore;

/// Default step for central differences.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Gradients smaller than this (both analytic and numeric) are treated
/// as zero and skipped rather than compared by ratio.
pub const ZERO_FLOOR: f64 = 1e-6;

/// Worst relative error across every element of every named parameter.
///
/// `store` must already hold the analytic gradients (run a backward pass
/// and `accumulate_into` first). `loss` is re-evaluated under perturbed
/// copies of the store, so it must be a pure function of the parameter
/// values. Returns 0.0 when every gradient is below [`ZERO_FLOOR`].
pub fn max_rel_error(
    store: &ParameterStore,
    names: &[String],
    mut loss: impl FnMut(&ParameterStore) -> f64,
    step: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for name in names {
        let shape = store
            .value(name)
            .unwrap_or_else(|_| panic!("gradcheck: unknown parameter {name}"))
            .shape();
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                let mut plus = store.clone();
                plus.nudge(name, i, j, step).expect("nudge +");
                let mut minus = store.clone();
                minus.nudge(name, i, j, -step).expect("nudge -");
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * step);
                let analytic = store
                    .grad(name)
                    .expect("gradcheck: parameter has no gradient buffer")
                    .get(i, j);
                let scale = fd.abs().max(analytic.abs());
                if scale > ZERO_FLOOR {
                    worst = worst.max((fd - analytic).abs() / scale);
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::nn::store::UpdateRule;
    use crate::nn::tape::Tape;

    #[test]
    fn quadratic_loss_checks_out() {
        // loss = mean((p - 3)^2): dp = 2 (p - 3) / len.
        let mut store = ParameterStore::new(UpdateRule::sgd(0.1));
        store
            .register("p", Mat::from_vec(1, 3, vec![1.0, 2.0, 5.0]))
            .unwrap();
        let run = |store: &ParameterStore| {
            let mut tape = Tape::new();
            let p = tape.param(store, "p").unwrap();
            let c = tape.offset(p, Mat::filled(1, 3, -3.0));
            let sq = tape.square(c);
            tape.mean_all(sq)
        };
        let mut tape = Tape::new();
        let p = tape.param(&store, "p").unwrap();
        let c = tape.offset(p, Mat::filled(1, 3, -3.0));
        let sq = tape.square(c);
        let loss = tape.mean_all(sq);
        let grads = tape.backward(loss).unwrap();
        tape.accumulate_into(&grads, &mut store).unwrap();

        let err = max_rel_error(
            &store,
            &["p".to_string()],
            |s| {
                let mut t = Tape::new();
                let p = t.param(s, "p").unwrap();
                let c = t.offset(p, Mat::filled(1, 3, -3.0));
                let sq = t.square(c);
                let m = t.mean_all(sq);
                t.value(m).scalar()
            },
            DEFAULT_STEP,
        );
        assert!(err < 1e-6, "relative error {err}");
        let _ = run;
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let mut store = ParameterStore::new(UpdateRule::sgd(0.1));
        store.register("p", Mat::filled(1, 1, 2.0)).unwrap();
        // Claim a bogus analytic gradient of 10 for loss = p^2 (true: 4).
        store
            .accumulate_grad("p", &Mat::filled(1, 1, 10.0))
            .unwrap();
        let err = max_rel_error(
            &store,
            &["p".to_string()],
            |s| {
                let v = s.value("p").unwrap().get(0, 0);
                v * v
            },
            DEFAULT_STEP,
        );
        assert!(err > 0.5, "should flag the bogus gradient, got {err}");
    }
}
