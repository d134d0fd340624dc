//! Central-difference gradient verification for test code.

use std::collections::BTreeMap;

use ndarray::ArrayD;

use super::{Graph, Value};

/// Outcome of a finite-difference sweep.
#[derive(Debug)]
pub struct GradReport {
    /// Largest relative error seen across all checked coordinates.
    pub max_rel_err: f64,
    /// `name[index]` of the worst coordinate, for failure messages.
    pub worst: String,
    /// Analytic and numeric derivative at the worst coordinate.
    pub worst_pair: (f64, f64),
    /// Total coordinates checked.
    pub checked: usize,
}

impl GradReport {
    pub fn assert_ok(&self, tol: f64) {
        assert!(
            self.max_rel_err < tol,
            "gradient mismatch at {}: analytic {:.6e} vs numeric {:.6e} (rel {:.3e}, {} checked)",
            self.worst,
            self.worst_pair.0,
            self.worst_pair.1,
            self.max_rel_err,
            self.checked
        );
    }
}

/// Relative error with an absolute floor: coordinates whose gradients sit
/// below the floor are compared absolutely instead, since central
/// differences at step 1e-4 carry truncation noise around 1e-5 and a
/// near-zero true gradient would turn that noise into a huge ratio. At
/// tolerance 1e-3 the floor admits |analytic - numeric| up to 1e-5.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(1e-2);
    (a - b).abs() / scale
}

fn eval<F>(params: &BTreeMap<String, ArrayD<f64>>, build: &F) -> f64
where
    F: Fn(&mut Graph, &BTreeMap<String, Value>) -> Value,
{
    let mut g = Graph::default();
    let mut handles = BTreeMap::new();
    for (name, v) in params {
        handles.insert(name.clone(), g.param(name, v.clone()));
    }
    let root = build(&mut g, &handles);
    g.scalar(root)
}

/// Compares analytic gradients of `build`'s scalar output against central
/// differences with step `h`, checking every `stride`-th coordinate of each
/// entry in `params`. The closure must be deterministic.
pub fn check_gradients<F>(
    params: &BTreeMap<String, ArrayD<f64>>,
    build: F,
    h: f64,
    stride: usize,
) -> GradReport
where
    F: Fn(&mut Graph, &BTreeMap<String, Value>) -> Value,
{
    assert!(stride >= 1);
    let mut g = Graph::default();
    let mut handles = BTreeMap::new();
    for (name, v) in params {
        handles.insert(name.clone(), g.param(name, v.clone()));
    }
    let root = build(&mut g, &handles);
    let grads = g.backward(root);
    let analytic = g.param_grads(&grads);

    let mut report = GradReport {
        max_rel_err: 0.0,
        worst: String::from("(none)"),
        worst_pair: (0.0, 0.0),
        checked: 0,
    };
    for (name, base) in params {
        let ana = &analytic[name];
        let ana_flat = ana.as_slice().expect("standard layout");
        for idx in (0..base.len()).step_by(stride) {
            let mut shifted = params.clone();
            shifted.get_mut(name).unwrap().as_slice_mut().unwrap()[idx] += h;
            let fp = eval(&shifted, &build);
            shifted.get_mut(name).unwrap().as_slice_mut().unwrap()[idx] -= 2.0 * h;
            let fm = eval(&shifted, &build);
            let num = (fp - fm) / (2.0 * h);
            let a = ana_flat[idx];
            let rel = rel_err(a, num);
            report.checked += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = format!("{name}[{idx}]");
                report.worst_pair = (a, num);
            }
        }
    }
    report
}
