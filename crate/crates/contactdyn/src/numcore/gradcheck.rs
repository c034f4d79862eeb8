//! Central finite-difference oracle for reverse-mode gradients.
//!
//! Used by unit tests, the acceptance suite and the `selfcheck` command. The
//! oracle re-evaluates the graph forward pass at perturbed parameters, so it
//! stays independent of the backward implementation it checks.

use rand::Rng;

use super::{Graph, ParamSet, Result, Tensor};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Outcome of one finite-difference sweep.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub coords_checked: usize,
    pub max_rel_err: f64,
    /// "param[flat_index]" of the worst coordinate.
    pub worst_coord: String,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err <= tolerance
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Compare reverse-mode gradients of `output` against central finite
/// differences with step `h`, probing `coords_per_tensor` random coordinates
/// of every parameter tensor.
pub fn check_gradients<R: Rng>(
    graph: &Graph,
    params: &mut ParamSet,
    inputs: &[(&str, &Tensor)],
    output: &str,
    coords_per_tensor: usize,
    h: f64,
    rng: &mut R,
) -> Result<GradCheckReport> {
    let exec = graph.forward(params, inputs)?;
    let grads = graph.backward(params, &exec, output)?;

    let mut report = GradCheckReport {
        coords_checked: 0,
        max_rel_err: 0.0,
        worst_coord: String::new(),
    };

    let eval = |params: &ParamSet| -> Result<f64> {
        let exec = graph.forward(params, inputs)?;
        graph.output(&exec, output)?.item()
    };

    for pi in 0..params.len() {
        let n = params.tensor_at(pi).len();
        if n == 0 {
            continue;
        }
        let coords: Vec<usize> = if n <= coords_per_tensor {
            (0..n).collect()
        } else {
            (0..coords_per_tensor).map(|_| rng.gen_range(0..n)).collect()
        };
        for c in coords {
            let orig = params.tensor_at(pi).data()[c];
            params.tensor_at_mut(pi).data_mut()[c] = orig + h;
            let plus = eval(params)?;
            params.tensor_at_mut(pi).data_mut()[c] = orig - h;
            let minus = eval(params)?;
            params.tensor_at_mut(pi).data_mut()[c] = orig;

            let fd = (plus - minus) / (2.0 * h);
            let ad = grads.grad_at(pi).data()[c];
            let err = rel_err(ad, fd);
            report.coords_checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst_coord = format!("{}[{}] ad={} fd={}", params.name_at(pi), c, ad, fd);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::GraphBuilder;
    use crate::rng::substream;

    /// Random 3-layer net: affine/silu/affine/sigmoid/affine -> squared sum.
    #[test]
    fn three_layer_net_matches_finite_differences() {
        let (din, dh, dout) = (5, 7, 3);
        let mut gb = GraphBuilder::new();
        let x = gb.input("x", &[din]).unwrap();
        let w1 = gb.param("w1", &[din, dh]).unwrap();
        let b1 = gb.param("b1", &[dh]).unwrap();
        let w2 = gb.param("w2", &[dh, dh]).unwrap();
        let b2 = gb.param("b2", &[dh]).unwrap();
        let w3 = gb.param("w3", &[dh, dout]).unwrap();
        let b3 = gb.param("b3", &[dout]).unwrap();
        let h1 = gb.affine(x, w1, b1).unwrap();
        let a1 = gb.silu(h1);
        let h2 = gb.affine(a1, w2, b2).unwrap();
        let a2 = gb.sigmoid(h2);
        let h3 = gb.affine(a2, w3, b3).unwrap();
        let sq = gb.mul(h3, h3).unwrap();
        let loss = gb.sum_all(sq);
        gb.output("loss", loss).unwrap();
        let graph = gb.finish();

        let mut rng = substream(17, "gradcheck");
        let mut params = ParamSet::new();
        for (name, shape) in [
            ("w1", vec![din, dh]),
            ("b1", vec![dh]),
            ("w2", vec![dh, dh]),
            ("b2", vec![dh]),
            ("w3", vec![dh, dout]),
            ("b3", vec![dout]),
        ] {
            params.insert(name, Tensor::randn(&shape, &mut rng)).unwrap();
        }
        let xv = Tensor::randn(&[din], &mut rng);
        let report = check_gradients(
            &graph,
            &mut params,
            &[("x", &xv)],
            "loss",
            8,
            DEFAULT_STEP,
            &mut rng,
        )
        .unwrap();
        assert!(
            report.passes(DEFAULT_TOLERANCE),
            "max rel err {} at {}",
            report.max_rel_err,
            report.worst_coord
        );
    }

    /// Every primitive that can sit on a gradient path, finite-difference
    /// checked through a small composite graph.
    #[test]
    fn primitive_suite_matches_finite_differences() {
        let mut gb = GraphBuilder::new();
        let p_vec = gb.param("p_vec", &[6]).unwrap();
        let p_mat = gb.param("p_mat", &[4, 6]).unwrap();
        let p_w = gb.param("p_w", &[6, 4]).unwrap();
        let p_b = gb.param("p_b", &[4]).unwrap();
        let p_seq = gb.param("p_seq", &[3, 8]).unwrap();
        let p_kern = gb.param("p_kern", &[5, 3, 3]).unwrap();
        let p_kb = gb.param("p_kb", &[5]).unwrap();
        let p_chan = gb.param("p_chan", &[5]).unwrap();

        // Dense path: affine over a batch, activations, clamp, ln.
        let aff = gb.affine(p_mat, p_w, p_b).unwrap(); // [4,4]
        let act = gb.silu(aff);
        let sp = gb.softplus(act);
        let shifted = gb.add_scalar(sp, 0.5);
        let cl = gb.clamp(shifted, 0.1, 50.0);
        let logd = gb.ln(cl);

        // Conv path: conv1d, layer norm, FiLM-style channel ops, upsample.
        let conv = gb.conv1d(p_seq, p_kern, p_kb, 2, 1).unwrap(); // [5,4]
        let norm = gb.layer_norm(conv).unwrap();
        let gained = gb.mul_channel(norm, p_chan).unwrap();
        let biased = gb.add_channel(gained, p_kb).unwrap();
        let up = gb.gather_last(biased, vec![0, 0, 1, 1, 2, 2, 3, 3]).unwrap(); // [5,8]

        // Pool path: per-point features then max over rows.
        let sigm = gb.sigmoid(p_mat);
        let pooled = gb.max_pool_rows(sigm).unwrap(); // [6]
        let mixed = gb.mul(pooled, p_vec).unwrap();

        let s1 = gb.sum_all(logd);
        let s2 = gb.sum_all(up);
        let s3 = gb.sum_all(mixed);
        let s12 = gb.add(s1, s2).unwrap();
        let s123 = gb.add(s12, s3).unwrap();
        let scaled = gb.scale(s123, 0.25);
        gb.output("loss", scaled).unwrap();
        let graph = gb.finish();

        let mut rng = substream(23, "prims");
        let mut params = ParamSet::new();
        for (name, shape) in [
            ("p_vec", vec![6]),
            ("p_mat", vec![4, 6]),
            ("p_w", vec![6, 4]),
            ("p_b", vec![4]),
            ("p_seq", vec![3, 8]),
            ("p_kern", vec![5, 3, 3]),
            ("p_kb", vec![5]),
            ("p_chan", vec![5]),
        ] {
            params.insert(name, Tensor::randn(&shape, &mut rng)).unwrap();
        }
        let report =
            check_gradients(&graph, &mut params, &[], "loss", 6, DEFAULT_STEP, &mut rng).unwrap();
        assert!(
            report.passes(DEFAULT_TOLERANCE),
            "max rel err {} at {}",
            report.max_rel_err,
            report.worst_coord
        );
    }
}
