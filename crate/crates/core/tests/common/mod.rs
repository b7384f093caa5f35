#![allow(dead_code)]

pub mod gradcheck;
pub mod oracle;

use icl_nav::neuralnet::{Param, Parameterized};

/// Worst relative error between analytic gradients (already stored in the
/// params) and central differences of `loss`, over every trainable entry.
pub fn max_fd_error<M, F>(model: &mut M, h: f64, loss: F) -> (f64, String)
where
    M: Parameterized,
    F: Fn(&M) -> f64,
{
    let mut slots: Vec<(String, usize)> = Vec::new();
    model.visit_params("", &mut |name, p: &Param| {
        if p.trainable {
            slots.push((name.to_string(), p.value.len()));
        }
    });
    let mut worst = (0.0f64, String::new());
    for (name, len) in slots {
        for i in 0..len {
            let analytic = read(model, &name, i, true);
            let orig = read(model, &name, i, false);
            write(model, &name, i, orig + h);
            let up = loss(model);
            write(model, &name, i, orig - h);
            let down = loss(model);
            write(model, &name, i, orig);
            let numeric = (up - down) / (2.0 * h);
            let scale = analytic.abs().max(numeric.abs());
            // entries whose gradient is numerically zero on both sides carry no signal
            let err = if scale < 1e-7 { (analytic - numeric).abs() } else { (analytic - numeric).abs() / scale };
            if err > worst.0 {
                worst = (err, format!("{name}[{i}]: analytic {analytic:e}, numeric {numeric:e}"));
            }
        }
    }
    worst
}

fn read<M: Parameterized>(m: &M, name: &str, i: usize, grad: bool) -> f64 {
    let mut out = 0.0;
    m.visit_params("", &mut |n, p| {
        if n == name {
            out = if grad { p.grad.data()[i] } else { p.value.data()[i] };
        }
    });
    out
}

fn write<M: Parameterized>(m: &mut M, name: &str, i: usize, v: f64) {
    m.visit_params_mut("", &mut |n, p| {
        if n == name {
            p.value.data_mut()[i] = v;
        }
    });
}
