//! 3x3 convolution with zero padding 1 (output spatial size equals input).

use rand_chacha::ChaCha8Rng;

use super::{orthogonal_init, Activation, NnError};

/// Channels-first convolution: input `in_ch x h x w` flattened row-major,
/// kernels `out_ch x in_ch x 3 x 3`. Spatial size is fixed at construction
/// so cached activations always describe a single, known geometry.
#[derive(Debug, Clone)]
pub struct Conv3x3 {
    pub in_ch: usize,
    pub out_ch: usize,
    pub h: usize,
    pub w: usize,
    pub k: Vec<f64>,
    pub b: Vec<f64>,
    pub gk: Vec<f64>,
    pub gb: Vec<f64>,
    act: Activation,
    cached_input: Vec<f64>,
    cached_pre: Vec<f64>,
    has_forward: bool,
}

impl Conv3x3 {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        h: usize,
        w: usize,
        act: Activation,
        init_gain: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut k = vec![0.0; out_ch * in_ch * 9];
        // Treat each output channel's stacked kernel as one matrix row.
        orthogonal_init(&mut k, out_ch, in_ch * 9, init_gain, rng);
        Self {
            in_ch,
            out_ch,
            h,
            w,
            k,
            b: vec![0.0; out_ch],
            gk: vec![0.0; out_ch * in_ch * 9],
            gb: vec![0.0; out_ch],
            act,
            cached_input: Vec::new(),
            cached_pre: Vec::new(),
            has_forward: false,
        }
    }

    pub fn out_len(&self) -> usize {
        self.out_ch * self.h * self.w
    }

    fn kernel_at(&self, oc: usize, ic: usize, di: usize, dj: usize) -> f64 {
        self.k[((oc * self.in_ch + ic) * 3 + di) * 3 + dj]
    }

    pub fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let expect = self.in_ch * self.h * self.w;
        if x.len() != expect {
            return Err(NnError::ShapeMismatch(format!(
                "conv expects {expect} inputs, got {}",
                x.len()
            )));
        }
        let (h, w) = (self.h as isize, self.w as isize);
        let plane = (self.h * self.w) as isize;
        let mut pre = vec![0.0; self.out_ch * self.h * self.w];
        for oc in 0..self.out_ch {
            for i in 0..h {
                for j in 0..w {
                    let mut acc = self.b[oc];
                    for ic in 0..self.in_ch {
                        for di in 0..3isize {
                            let pi = i + di - 1;
                            if pi < 0 || pi >= h {
                                continue;
                            }
                            for dj in 0..3isize {
                                let pj = j + dj - 1;
                                if pj < 0 || pj >= w {
                                    continue;
                                }
                                acc += self.kernel_at(oc, ic, di as usize, dj as usize)
                                    * x[(ic as isize * plane + pi * w + pj) as usize];
                            }
                        }
                    }
                    pre[oc * (self.h * self.w) + (i * w + j) as usize] = acc;
                }
            }
        }
        self.cached_input = x.to_vec();
        self.cached_pre = pre.clone();
        self.has_forward = true;
        let out = pre
            .into_iter()
            .map(|p| match self.act {
                Activation::Tanh => p.tanh(),
                Activation::Relu => p.max(0.0),
                Activation::Linear => p,
            })
            .collect();
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &[f64]) -> Result<Vec<f64>, NnError> {
        if !self.has_forward {
            return Err(NnError::BackwardWithoutForward);
        }
        if grad_out.len() != self.out_len() {
            return Err(NnError::ShapeMismatch(format!(
                "conv backward expects {} grads, got {}",
                self.out_len(),
                grad_out.len()
            )));
        }
        let (h, w) = (self.h as isize, self.w as isize);
        let plane = self.h * self.w;
        let mut grad_in = vec![0.0; self.in_ch * plane];
        for oc in 0..self.out_ch {
            for i in 0..h {
                for j in 0..w {
                    let idx = oc * plane + (i * w + j) as usize;
                    let dact = match self.act {
                        Activation::Tanh => {
                            let y = self.cached_pre[idx].tanh();
                            1.0 - y * y
                        }
                        Activation::Relu => {
                            if self.cached_pre[idx] > 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        Activation::Linear => 1.0,
                    };
                    let dpre = grad_out[idx] * dact;
                    if dpre == 0.0 {
                        continue;
                    }
                    self.gb[oc] += dpre;
                    for ic in 0..self.in_ch {
                        for di in 0..3isize {
                            let pi = i + di - 1;
                            if pi < 0 || pi >= h {
                                continue;
                            }
                            for dj in 0..3isize {
                                let pj = j + dj - 1;
                                if pj < 0 || pj >= w {
                                    continue;
                                }
                                let xin = (ic * plane) + (pi * w + pj) as usize;
                                let kk =
                                    ((oc * self.in_ch + ic) * 3 + di as usize) * 3 + dj as usize;
                                self.gk[kk] += dpre * self.cached_input[xin];
                                grad_in[xin] += dpre * self.k[kk];
                            }
                        }
                    }
                }
            }
        }
        Ok(grad_in)
    }

    pub fn zero_grad(&mut self) {
        self.gk.iter_mut().for_each(|g| *g = 0.0);
        self.gb.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn for_each_param_grad(&mut self, f: &mut dyn FnMut(&mut f64, &mut f64)) {
        for (p, g) in self.k.iter_mut().zip(self.gk.iter_mut()) {
            f(p, g);
        }
        for (p, g) in self.b.iter_mut().zip(self.gb.iter_mut()) {
            f(p, g);
        }
    }
}
