//! Forward pass and exact backpropagation through time.
//!
//! Examples are processed in fixed-size chunks laid out batch-minor
//! (`features x batch`), so inner loops run over the batch. Every output
//! element is accumulated in the same order regardless of which chunk it
//! lands in, which makes predictions independent of batch composition.

use super::{CellKind, Layout, NetworkConfig, NetworkParams};
use crate::error::{Error, Result};
use crate::series::WindowedDataset;

const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// `N x n_outputs`, row-major.
    pub predictions: Vec<f64>,
    /// Top-layer hidden state at the last step, `N x n_hidden` row-major.
    pub last_hidden: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out[r][:] += sum_k w[r][k] * inp[k][:]` for `rows` rows of a
/// `rows x cols` matrix `w` and a `cols x b` input.
#[inline]
fn gemm_acc(out: &mut [f64], w: &[f64], inp: &[f64], rows: usize, cols: usize, b: usize) {
    for r in 0..rows {
        let o = &mut out[r * b..(r + 1) * b];
        let wr = &w[r * cols..(r + 1) * cols];
        for (k, &wk) in wr.iter().enumerate() {
            let x = &inp[k * b..(k + 1) * b];
            for (oi, xi) in o.iter_mut().zip(x) {
                *oi += wk * xi;
            }
        }
    }
}

/// `dx[k][:] += sum_r w[r][k] * da[r][:]`
#[inline]
fn gemm_t_acc(dx: &mut [f64], w: &[f64], da: &[f64], rows: usize, cols: usize, b: usize) {
    for r in 0..rows {
        let d = &da[r * b..(r + 1) * b];
        let wr = &w[r * cols..(r + 1) * cols];
        for (k, &wk) in wr.iter().enumerate() {
            let x = &mut dx[k * b..(k + 1) * b];
            for (xi, di) in x.iter_mut().zip(d) {
                *xi += wk * di;
            }
        }
    }
}

/// `dw[r][k] += sum_b da[r][b] * inp[k][b]`
#[inline]
fn outer_acc(dw: &mut [f64], da: &[f64], inp: &[f64], rows: usize, cols: usize, b: usize) {
    for r in 0..rows {
        let d = &da[r * b..(r + 1) * b];
        let row = &mut dw[r * cols..(r + 1) * cols];
        for (k, slot) in row.iter_mut().enumerate() {
            let x = &inp[k * b..(k + 1) * b];
            let mut s = 0.0;
            for (di, xi) in d.iter().zip(x) {
                s += di * xi;
            }
            *slot += s;
        }
    }
}

#[inline]
fn bias_fill(out: &mut [f64], bias: &[f64], b: usize) {
    for (r, &bv) in bias.iter().enumerate() {
        out[r * b..(r + 1) * b].fill(bv);
    }
}

#[inline]
fn bias_acc(db: &mut [f64], da: &[f64], b: usize) {
    for (r, slot) in db.iter_mut().enumerate() {
        *slot += da[r * b..(r + 1) * b].iter().sum::<f64>();
    }
}

/// Activations kept for the backward pass, for one chunk.
struct Trace {
    /// `inputs[t]`: layer-0 input at step t, `D x B`.
    inputs: Vec<Vec<f64>>,
    /// `hidden[l][t]`: hidden state after step `t - 1` (`hidden[l][0]` is zero), `H x B`.
    hidden: Vec<Vec<Vec<f64>>>,
    /// `gates[l][t]`: post-nonlinearity gate values, `G x B`.
    gates: Vec<Vec<Vec<f64>>>,
    /// LSTM cell states, indexed like `hidden`.
    cells: Vec<Vec<Vec<f64>>>,
    /// GRU `reset * h_prev`, indexed like `gates`.
    reset_hidden: Vec<Vec<Vec<f64>>>,
    predictions: Vec<f64>,
}

struct Net<'a> {
    cfg: NetworkConfig,
    layout: Layout,
    p: &'a [f64],
    window: usize,
}

impl<'a> Net<'a> {
    fn new(params: &'a NetworkParams, window: usize) -> Self {
        let cfg = *params.config();
        Self {
            layout: cfg.layout(),
            cfg,
            p: params.as_slice(),
            window,
        }
    }

    fn block(&self, l: usize) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let o = self.layout.layers[l];
        let g = self.cfg.gate_rows();
        (&self.p[o.w_in..o.w_rec], &self.p[o.w_rec..o.bias], &self.p[o.bias..o.bias + g])
    }

    fn head(&self) -> (&'a [f64], &'a [f64]) {
        (&self.p[self.layout.head_w..self.layout.head_b], &self.p[self.layout.head_b..self.layout.total])
    }

    /// `rows` holds `b` consecutive examples of `T * D` values each.
    fn forward_chunk(&self, rows: &[f64], b: usize) -> Trace {
        let NetworkConfig {
            cell_kind,
            n_inputs: d,
            n_hidden: h,
            n_layers,
            n_outputs,
        } = self.cfg;
        let g = self.cfg.gate_rows();
        let t_len = self.window;

        let mut inputs = vec![vec![0.0; d * b]; t_len];
        for (e, row) in rows.chunks_exact(t_len * d).enumerate() {
            for t in 0..t_len {
                for k in 0..d {
                    inputs[t][k * b + e] = row[t * d + k];
                }
            }
        }

        let mut hidden: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n_layers);
        let mut gates = Vec::with_capacity(n_layers);
        let mut cells = Vec::new();
        let mut reset_hidden = Vec::new();

        for l in 0..n_layers {
            let (w_in, w_rec, bias) = self.block(l);
            let k_in = self.cfg.layer_input(l);
            let mut hs = vec![vec![0.0; h * b]];
            let mut gs = Vec::with_capacity(t_len);
            let mut cs = vec![vec![0.0; h * b]];
            let mut rhs = Vec::new();
            for t in 0..t_len {
                let inp: &[f64] = if l == 0 { &inputs[t] } else { &hidden[l - 1][t + 1] };
                let h_prev = &hs[t];
                let mut a = vec![0.0; g * b];
                bias_fill(&mut a, bias, b);
                gemm_acc(&mut a, w_in, inp, g, k_in, b);
                let mut h_new = vec![0.0; h * b];
                match cell_kind {
                    CellKind::Elman => {
                        gemm_acc(&mut a, w_rec, h_prev, g, h, b);
                        for v in a.iter_mut() {
                            *v = v.tanh();
                        }
                        h_new.copy_from_slice(&a);
                    }
                    CellKind::Lstm => {
                        gemm_acc(&mut a, w_rec, h_prev, g, h, b);
                        let c_prev = &cs[t];
                        let mut c_new = vec![0.0; h * b];
                        for j in 0..h * b {
                            let i = sigmoid(a[j]);
                            let f = sigmoid(a[h * b + j]);
                            let gg = a[2 * h * b + j].tanh();
                            let o = sigmoid(a[3 * h * b + j]);
                            a[j] = i;
                            a[h * b + j] = f;
                            a[2 * h * b + j] = gg;
                            a[3 * h * b + j] = o;
                            c_new[j] = f * c_prev[j] + i * gg;
                            h_new[j] = o * c_new[j].tanh();
                        }
                        cs.push(c_new);
                    }
                    CellKind::Gru => {
                        let zr = 2 * h;
                        gemm_acc(&mut a[..zr * b], w_rec, h_prev, zr, h, b);
                        for v in a[..zr * b].iter_mut() {
                            *v = sigmoid(*v);
                        }
                        let mut rh = vec![0.0; h * b];
                        for j in 0..h * b {
                            rh[j] = a[h * b + j] * h_prev[j];
                        }
                        gemm_acc(&mut a[zr * b..], &w_rec[zr * h..], &rh, h, h, b);
                        for j in 0..h * b {
                            let n = a[zr * b + j].tanh();
                            a[zr * b + j] = n;
                            let z = a[j];
                            h_new[j] = (1.0 - z) * h_prev[j] + z * n;
                        }
                        rhs.push(rh);
                    }
                }
                gs.push(a);
                hs.push(h_new);
            }
            hidden.push(hs);
            gates.push(gs);
            cells.push(cs);
            reset_hidden.push(rhs);
        }

        let (w_out, b_out) = self.head();
        let mut predictions = vec![0.0; n_outputs * b];
        bias_fill(&mut predictions, b_out, b);
        gemm_acc(&mut predictions, w_out, &hidden[n_layers - 1][t_len], n_outputs, h, b);

        Trace {
            inputs,
            hidden,
            gates,
            cells,
            reset_hidden,
            predictions,
        }
    }

    /// Accumulates parameter gradients given `d loss / d prediction`
    /// (`O x B`).
    fn backward_chunk(&self, tr: &Trace, dpred: &[f64], b: usize, grad: &mut [f64]) {
        let NetworkConfig {
            cell_kind,
            n_hidden: h,
            n_layers,
            n_outputs,
            ..
        } = self.cfg;
        let g = self.cfg.gate_rows();
        let t_len = self.window;
        let top = n_layers - 1;

        let (w_out, _) = self.head();
        let (hw, hb) = (self.layout.head_w, self.layout.head_b);
        outer_acc(&mut grad[hw..hb], dpred, &tr.hidden[top][t_len], n_outputs, h, b);
        bias_acc(&mut grad[hb..self.layout.total], dpred, b);

        // Gradient flowing into each step's hidden output from above.
        let mut d_from_above = vec![vec![0.0; h * b]; t_len];
        gemm_t_acc(&mut d_from_above[t_len - 1], w_out, dpred, n_outputs, h, b);

        for l in (0..n_layers).rev() {
            let (w_in, w_rec, _) = self.block(l);
            let o = self.layout.layers[l];
            let k_in = self.cfg.layer_input(l);
            let mut d_below = if l > 0 {
                vec![vec![0.0; h * b]; t_len]
            } else {
                Vec::new()
            };
            let mut dh_rec = vec![0.0; h * b];
            let mut dc_next = vec![0.0; h * b];
            let mut da = vec![0.0; g * b];

            for t in (0..t_len).rev() {
                let h_prev = &tr.hidden[l][t];
                let acts = &tr.gates[l][t];
                let inp: &[f64] = if l == 0 { &tr.inputs[t] } else { &tr.hidden[l - 1][t + 1] };
                let mut dh = d_from_above[t].clone();
                for (x, y) in dh.iter_mut().zip(&dh_rec) {
                    *x += y;
                }
                let mut dh_prev = vec![0.0; h * b];

                match cell_kind {
                    CellKind::Elman => {
                        for j in 0..h * b {
                            let hv = acts[j];
                            da[j] = dh[j] * (1.0 - hv * hv);
                        }
                        outer_acc(&mut grad[o.w_rec..o.bias], &da, h_prev, g, h, b);
                        gemm_t_acc(&mut dh_prev, w_rec, &da, g, h, b);
                    }
                    CellKind::Lstm => {
                        let c = &tr.cells[l][t + 1];
                        let c_prev = &tr.cells[l][t];
                        for j in 0..h * b {
                            let (i, f, gg, og) = (acts[j], acts[h * b + j], acts[2 * h * b + j], acts[3 * h * b + j]);
                            let tc = c[j].tanh();
                            let d_o = dh[j] * tc;
                            let dc = dh[j] * og * (1.0 - tc * tc) + dc_next[j];
                            da[j] = dc * gg * i * (1.0 - i);
                            da[h * b + j] = dc * c_prev[j] * f * (1.0 - f);
                            da[2 * h * b + j] = dc * i * (1.0 - gg * gg);
                            da[3 * h * b + j] = d_o * og * (1.0 - og);
                            dc_next[j] = dc * f;
                        }
                        outer_acc(&mut grad[o.w_rec..o.bias], &da, h_prev, g, h, b);
                        gemm_t_acc(&mut dh_prev, w_rec, &da, g, h, b);
                    }
                    CellKind::Gru => {
                        let rh = &tr.reset_hidden[l][t];
                        let (zb, rb, nb) = (0, h * b, 2 * h * b);
                        for j in 0..h * b {
                            let (z, n) = (acts[zb + j], acts[nb + j]);
                            da[zb + j] = dh[j] * (n - h_prev[j]) * z * (1.0 - z);
                            da[nb + j] = dh[j] * z * (1.0 - n * n);
                            dh_prev[j] = dh[j] * (1.0 - z);
                        }
                        // Candidate path through reset * h_prev.
                        let w_n = &w_rec[2 * h * h..];
                        outer_acc(&mut grad[o.w_rec + 2 * h * h..o.bias], &da[nb..], rh, h, h, b);
                        let mut d_rh = vec![0.0; h * b];
                        gemm_t_acc(&mut d_rh, w_n, &da[nb..], h, h, b);
                        for j in 0..h * b {
                            let r = acts[rb + j];
                            da[rb + j] = d_rh[j] * h_prev[j] * r * (1.0 - r);
                            dh_prev[j] += d_rh[j] * r;
                        }
                        outer_acc(&mut grad[o.w_rec..o.w_rec + 2 * h * h], &da[..nb], h_prev, 2 * h, h, b);
                        gemm_t_acc(&mut dh_prev, &w_rec[..2 * h * h], &da[..nb], 2 * h, h, b);
                    }
                }

                outer_acc(&mut grad[o.w_in..o.w_rec], &da, inp, g, k_in, b);
                bias_acc(&mut grad[o.bias..o.bias + g], &da, b);
                if l > 0 {
                    gemm_t_acc(&mut d_below[t], w_in, &da, g, k_in, b);
                }
                dh_rec = dh_prev;
            }
            d_from_above = d_below;
        }
    }
}

fn check_inputs(params: &NetworkParams, inputs: &[f64], window: usize) -> Result<usize> {
    let cfg = params.config();
    cfg.validate()?;
    if params.len() != cfg.param_count() {
        return Err(Error::shape("network parameters", cfg.param_count(), params.len()));
    }
    if window == 0 {
        return Err(Error::InvalidArgument("window length must be positive".into()));
    }
    let stride = window * cfg.n_inputs;
    if inputs.is_empty() || !inputs.len().is_multiple_of(stride) {
        return Err(Error::shape(
            "network input",
            format!("N x {window} x {}", cfg.n_inputs),
            format!("{} values", inputs.len()),
        ));
    }
    Ok(inputs.len() / stride)
}

fn for_each_chunk(n: usize, mut f: impl FnMut(usize, usize)) {
    let mut start = 0;
    while start < n {
        let b = CHUNK.min(n - start);
        f(start, b);
        start += b;
    }
}

/// Runs the network over a flat `N x T x D` block.
pub fn forward(params: &NetworkParams, inputs: &[f64], window: usize) -> Result<ForwardOutput> {
    let n = check_inputs(params, inputs, window)?;
    let cfg = *params.config();
    let net = Net::new(params, window);
    let stride = window * cfg.n_inputs;
    let (o, h) = (cfg.n_outputs, cfg.n_hidden);
    let mut predictions = vec![0.0; n * o];
    let mut last_hidden = vec![0.0; n * h];
    for_each_chunk(n, |start, b| {
        let tr = net.forward_chunk(&inputs[start * stride..(start + b) * stride], b);
        let top = &tr.hidden[cfg.n_layers - 1][window];
        for e in 0..b {
            for k in 0..o {
                predictions[(start + e) * o + k] = tr.predictions[k * b + e];
            }
            for k in 0..h {
                last_hidden[(start + e) * h + k] = top[k * b + e];
            }
        }
    });
    Ok(ForwardOutput {
        predictions,
        last_hidden,
    })
}

/// Single-window prediction: the `n_outputs` values for one `T x D` window.
pub fn predict(params: &NetworkParams, window: &[f64]) -> Result<Vec<f64>> {
    let d = params.config().n_inputs;
    if window.is_empty() || !window.len().is_multiple_of(d) {
        return Err(Error::shape("network window", format!("T x {d}"), window.len()));
    }
    Ok(forward(params, window, window.len() / d)?.predictions)
}

/// Mean squared error over all `N x n_outputs` targets and its exact
/// gradient with respect to every parameter.
pub fn loss_and_gradients(params: &NetworkParams, data: &WindowedDataset) -> Result<(f64, NetworkParams)> {
    let window = data.window_len();
    if data.features() != params.config().n_inputs {
        return Err(Error::shape("dataset features", params.config().n_inputs, data.features()));
    }
    let n = check_inputs(params, data.x(), window)?;
    let cfg = *params.config();
    let o = cfg.n_outputs;
    if data.y().len() != n * o {
        return Err(Error::shape("targets", n * o, data.y().len()));
    }
    let net = Net::new(params, window);
    let stride = window * cfg.n_inputs;
    let denom = (n * o) as f64;
    let mut grad = NetworkParams::zeros(cfg)?;
    let mut sse = 0.0;
    for_each_chunk(n, |start, b| {
        let tr = net.forward_chunk(&data.x()[start * stride..(start + b) * stride], b);
        let mut dpred = vec![0.0; o * b];
        for e in 0..b {
            for k in 0..o {
                let r = tr.predictions[k * b + e] - data.y()[(start + e) * o + k];
                sse += r * r;
                dpred[k * b + e] = 2.0 * r / denom;
            }
        }
        net.backward_chunk(&tr, &dpred, b, grad.as_mut_slice());
    });
    Ok((sse / denom, grad))
}

/// Mean squared error only.
pub(crate) fn loss(params: &NetworkParams, data: &WindowedDataset) -> Result<f64> {
    let out = forward(params, data.x(), data.window_len())?;
    let o = params.config().n_outputs;
    if out.predictions.len() != data.len() * o {
        return Err(Error::shape("targets", out.predictions.len(), data.len() * o));
    }
    let sse: f64 = out
        .predictions
        .iter()
        .zip(data.y())
        .map(|(p, y)| (p - y) * (p - y))
        .sum();
    Ok(sse / out.predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::super::init_params;
    use super::*;
    use crate::series::make_windows;
    use crate::series::TimeSeries;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(kind: CellKind, h: usize, layers: usize) -> NetworkConfig {
        NetworkConfig {
            cell_kind: kind,
            n_inputs: 1,
            n_hidden: h,
            n_layers: layers,
            n_outputs: 1,
        }
    }

    #[test]
    fn zero_weights_predict_head_bias() {
        for kind in CellKind::ALL {
            let c = NetworkConfig::standard(kind);
            let mut p = NetworkParams::zeros(c).unwrap();
            let last = p.len() - 1;
            p.as_mut_slice()[last] = 0.75;
            let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.3 - 2.0).collect();
            let out = forward(&p, &x, 10).unwrap();
            assert_eq!(out.predictions, vec![0.75; 3], "{kind}");
        }
    }

    #[test]
    fn single_elman_step_by_hand() {
        let c = cfg(CellKind::Elman, 1, 1);
        // [w_in, w_rec, bias, head_w, head_b]
        let p = NetworkParams::from_flat(c, vec![1.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let y = predict(&p, &[0.5]).unwrap()[0];
        assert!((y - 0.5f64.tanh()).abs() < 1e-15);
        assert!((y - 0.462117).abs() < 1e-6);
    }

    #[test]
    fn batch_invariance_is_bit_exact() {
        for kind in CellKind::ALL {
            let p = init_params(cfg(kind, 5, 2), 3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            // More than one chunk so chunk boundaries are exercised.
            let n = CHUNK + 7;
            let x: Vec<f64> = (0..n * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let all = forward(&p, &x, 4).unwrap().predictions;
            for i in 0..n {
                let one = predict(&p, &x[i * 4..(i + 1) * 4]).unwrap();
                assert_eq!(one[0].to_bits(), all[i].to_bits(), "{kind} row {i}");
            }
        }
    }

    #[test]
    fn shape_errors() {
        let p = init_params(cfg(CellKind::Lstm, 3, 1), 0).unwrap();
        assert!(forward(&p, &[1.0, 2.0, 3.0], 2).is_err());
        assert!(forward(&p, &[], 2).is_err());
        let err = forward(&p, &[1.0; 5], 2).unwrap_err().to_string();
        assert!(err.contains("N x 2 x 1"), "{err}");
    }

    #[test]
    fn perfect_fit_has_zero_loss_and_gradient() {
        for kind in CellKind::ALL {
            let p = init_params(cfg(kind, 3, 2), 4).unwrap();
            let s = TimeSeries::new((0..20).map(|i| (i as f64 * 0.4).sin()).collect()).unwrap();
            let ds = make_windows(&s, 3).unwrap();
            let preds = forward(&p, ds.x(), 3).unwrap().predictions;
            let fitted = WindowedDataset::from_parts(ds.x().to_vec(), preds, 3, 1).unwrap();
            let (mse, g) = loss_and_gradients(&p, &fitted).unwrap();
            assert_eq!(mse, 0.0);
            assert!(g.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn constant_offset_gives_squared_loss() {
        let p = init_params(cfg(CellKind::Gru, 4, 2), 8).unwrap();
        let s = TimeSeries::new((0..25).map(|i| (i as f64 * 0.3).cos()).collect()).unwrap();
        let ds = make_windows(&s, 5).unwrap();
        let preds = forward(&p, ds.x(), 5).unwrap().predictions;
        let shifted: Vec<f64> = preds.iter().map(|v| v + 0.5).collect();
        let data = WindowedDataset::from_parts(ds.x().to_vec(), shifted, 5, 1).unwrap();
        let (mse, _) = loss_and_gradients(&p, &data).unwrap();
        assert!((mse - 0.25).abs() < 1e-15);
    }

    /// Central differences on a random subset of coordinates.
    fn check_gradients(kind: CellKind, h: usize, t: usize, seed: u64) -> f64 {
        let c = cfg(kind, h, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..c.param_count()).map(|_| rng.random_range(-0.8..0.8)).collect();
        let p = NetworkParams::from_flat(c, data).unwrap();
        let n = 6;
        let x: Vec<f64> = (0..n * t).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ds = WindowedDataset::from_parts(x, y, t, 1).unwrap();
        let (_, g) = loss_and_gradients(&p, &ds).unwrap();
        let mut worst: f64 = 0.0;
        let step = 1e-5;
        for _ in 0..25 {
            let i = rng.random_range(0..p.len());
            let mut plus = p.clone();
            plus.as_mut_slice()[i] += step;
            let mut minus = p.clone();
            minus.as_mut_slice()[i] -= step;
            let fd = (loss(&plus, &ds).unwrap() - loss(&minus, &ds).unwrap()) / (2.0 * step);
            let an = g.as_slice()[i];
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-7);
            worst = worst.max(rel);
        }
        worst
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in CellKind::ALL {
            for (h, t) in [(2, 1), (3, 3), (2, 5)] {
                let rel = check_gradients(kind, h, t, 17);
                assert!(rel <= 1e-4, "{kind} h={h} t={t}: {rel}");
            }
        }
    }
}
