use ldp_autodiff::{GradCheckReport, Tape, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LdpError, Result};
use crate::layers::Fwd;
use crate::model::MicroModel;
use crate::params::ParamId;

/// Compares backward gradients with central differences at `n` trainable
/// coordinates drawn uniformly (seeded) from all trainable parameters.
pub fn sampled_grad_check(
    model: &mut MicroModel,
    loss: impl Fn(&MicroModel, &mut Fwd) -> Result<Var>,
    n: usize,
    h: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if !(h > 0.0) {
        return Err(LdpError::Config(format!("finite-difference step must be positive, got {h}")));
    }
    let ids: Vec<ParamId> = model.params().trainable();
    let sizes: Vec<usize> = ids.iter().map(|&id| model.params().get(id).len()).collect();
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(LdpError::State("no trainable parameters to check".into()));
    }

    let mut tape = Tape::new();
    let bound = model.bind(&mut tape);
    let l = {
        let mut f = Fwd { tape: &mut tape, bound: &bound, dropout: None };
        loss(model, &mut f)?
    };
    let grads = tape.backward(l)?;

    let eval = |m: &MicroModel| -> Result<f64> {
        let mut t = Tape::no_grad();
        let b = m.bind(&mut t);
        let mut f = Fwd { tape: &mut t, bound: &b, dropout: None };
        let v = loss(m, &mut f)?;
        let x = t.value(v).item()?;
        if !x.is_finite() {
            return Err(ldp_autodiff::AutodiffError::NonFinite { op: "sampled_grad_check" }.into());
        }
        Ok(x)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport::empty();
    for _ in 0..n {
        let mut flat = rng.random_range(0..total);
        let mut k = 0;
        while flat >= sizes[k] {
            flat -= sizes[k];
            k += 1;
        }
        let id = ids[k];
        let analytic = grads.get(bound.var(id)).map_or(0.0, |g| g[flat]);
        let x0 = model.params().get(id).data()[flat];
        model.params_mut().get_mut(id).data_mut()[flat] = x0 + h;
        let plus = eval(model);
        model.params_mut().get_mut(id).data_mut()[flat] = x0 - h;
        let minus = eval(model);
        model.params_mut().get_mut(id).data_mut()[flat] = x0;
        let numeric = (plus? - minus?) / (2.0 * h);
        report.record(k, analytic, numeric);
    }
    Ok(report)
}
