//! Dense f32 tensors and the handful of kernels the engine is built on.
//!
//! Everything is row-major and single-threaded. Image-like tensors are laid
//! out channel-first (`c × h × w`).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f32) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f32) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    /// 2-D tensor from nested rows. Panics on ragged input; meant for literals.
    pub fn from_rows(rows: &[&[f32]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Tensor {
            shape: vec![rows.len(), cols],
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Tensor::new(shape.to_vec(), self.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match *self.shape.as_slice() {
            [r, c] => Ok((r, c)),
            _ => Err(Error::Dimension(format!(
                "expected a matrix, got shape {:?}",
                self.shape
            ))),
        }
    }

    /// `(channels, height, width)` of a rank-3 tensor.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match *self.shape.as_slice() {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(Error::Dimension(format!(
                "expected a c×h×w tensor, got shape {:?}",
                self.shape
            ))),
        }
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let cols = self.shape[self.shape.len() - 1];
        &self.data[i * cols..(i + 1) * cols]
    }

    /// One channel plane of a `c × h × w` tensor.
    pub fn plane(&self, c: usize) -> &[f32] {
        let hw = self.shape[1] * self.shape[2];
        &self.data[c * hw..(c + 1) * hw]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let hw = self.shape[1] * self.shape[2];
        &mut self.data[c * hw..(c + 1) * hw]
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "cannot add {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f32) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn transpose2(&self) -> Result<Tensor> {
        let (r, c) = self.dims2()?;
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor::new(vec![c, r], out)
    }

    /// Reinterpret a `c × h × w` map as an `(h·w) × c` matrix of pixel vectors.
    pub fn pixels_as_rows(&self) -> Result<Tensor> {
        let (c, h, w) = self.dims3()?;
        Tensor::new(vec![c, h * w], self.data.clone())?.transpose2()
    }

    /// Inverse of [`Tensor::pixels_as_rows`].
    pub fn rows_as_pixels(&self, h: usize, w: usize) -> Result<Tensor> {
        let (n, c) = self.dims2()?;
        if n != h * w {
            return Err(Error::Dimension(format!(
                "{n} pixel rows cannot form a {h}×{w} map"
            )));
        }
        self.transpose2()?.reshape(&[c, h, w])
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, p) = a.dims2()?;
    let (p2, n) = b.dims2()?;
    if p != p2 {
        return Err(Error::Dimension(format!(
            "matmul of {:?} by {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = vec![0.0f32; m * n];
    for i in 0..m {
        let a_row = &a.data[i * p..(i + 1) * p];
        let o_row = &mut out[i * n..(i + 1) * n];
        for (t, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = &b.data[t * n..(t + 1) * n];
            for (o, &bv) in o_row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

/// Softmax along the last axis of a matrix, with per-row max subtraction.
/// Entries equal to `-inf` receive exactly zero weight.
pub fn softmax_rows(x: &Tensor) -> Result<Tensor> {
    let (_, n) = x.dims2()?;
    if n == 0 {
        return Err(Error::Parameter("softmax over empty rows".into()));
    }
    let mut out = x.clone();
    for row in out.data.chunks_mut(n) {
        softmax_in_place(row);
    }
    Ok(out)
}

pub(crate) fn softmax_in_place(row: &mut [f32]) {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    if max == f32::NEG_INFINITY {
        // fully masked row; callers guarantee this does not happen
        let u = 1.0 / row.len() as f32;
        row.iter_mut().for_each(|v| *v = u);
        return;
    }
    let mut sum = 0.0f64;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += f64::from(*v);
    }
    let inv = (1.0 / sum) as f32;
    for v in row.iter_mut() {
        *v *= inv;
    }
}

/// Keep the `k` largest entries of each row and replace the rest with `-inf`.
/// Ties go to the lowest column index.
pub fn topk_mask_rows(x: &Tensor, k: usize) -> Result<Tensor> {
    let (_, n) = x.dims2()?;
    if k == 0 {
        return Err(Error::Parameter("top-k requires k >= 1".into()));
    }
    let mut out = x.clone();
    if k >= n {
        return Ok(out);
    }
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for row in out.data.chunks_mut(n) {
        topk_mask_row(row, k, &mut order);
    }
    Ok(out)
}

pub(crate) fn topk_mask_row(row: &mut [f32], k: usize, scratch: &mut Vec<usize>) {
    let n = row.len();
    if k >= n {
        return;
    }
    scratch.clear();
    scratch.extend(0..n);
    // descending by value, then ascending by index: a strict total order
    scratch.select_nth_unstable_by(k - 1, |&a, &b| {
        row[b].total_cmp(&row[a]).then(a.cmp(&b))
    });
    for &i in &scratch[k..] {
        row[i] = f32::NEG_INFINITY;
    }
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    relu_in_place(&mut out);
    out
}

pub fn relu_in_place(x: &mut Tensor) {
    for v in &mut x.data {
        *v = v.max(0.0);
    }
}

/// Stride-1, zero-padded 3×3 convolution (cross-correlation, as in every DL
/// framework).
pub fn conv3x3(x: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (c_in, h, w) = x.dims3()?;
    let (c_out, k_in, kh, kw) = match *kernel.shape() {
        [a, b, c, d] => (a, b, c, d),
        _ => {
            return Err(Error::Dimension(format!(
                "conv kernel must be rank 4, got {:?}",
                kernel.shape()
            )))
        }
    };
    if k_in != c_in || kh != 3 || kw != 3 {
        return Err(Error::Dimension(format!(
            "conv kernel {:?} does not fit input {:?}",
            kernel.shape(),
            x.shape()
        )));
    }
    if bias.shape() != [c_out] {
        return Err(Error::Dimension(format!(
            "conv bias {:?} does not match {c_out} output channels",
            bias.shape()
        )));
    }
    let hw = h * w;
    let mut out = vec![0.0f32; c_out * hw];
    for co in 0..c_out {
        let o = &mut out[co * hw..(co + 1) * hw];
        o.fill(bias.data[co]);
        for ci in 0..c_in {
            let plane = &x.data[ci * hw..(ci + 1) * hw];
            let kbase = (co * c_in + ci) * 9;
            for ky in 0..3usize {
                for kx in 0..3usize {
                    let wv = kernel.data[kbase + ky * 3 + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    // output (y, x) reads input (y + ky - 1, x + kx - 1)
                    let y0 = 1usize.saturating_sub(ky);
                    let y1 = (h + 1 - ky).min(h);
                    let x0 = 1usize.saturating_sub(kx);
                    let x1 = (w + 1 - kx).min(w);
                    if x0 >= x1 {
                        continue;
                    }
                    for y in y0..y1 {
                        let iy = y + ky - 1;
                        let orow = &mut o[y * w + x0..y * w + x1];
                        let irow = &plane[iy * w + x0 + kx - 1..iy * w + x1 + kx - 1];
                        for (ov, &iv) in orow.iter_mut().zip(irow) {
                            *ov += wv * iv;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![c_out, h, w], out)
}

/// 2×2 average pooling with stride 2. Extents must be even.
pub fn avg_pool2(x: &Tensor) -> Result<Tensor> {
    avg_pool(x, 2)
}

/// `factor × factor` average pooling. Extents must be divisible by `factor`.
pub fn avg_pool(x: &Tensor, factor: usize) -> Result<Tensor> {
    let (c, h, w) = x.dims3()?;
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::Dimension(format!(
            "cannot pool {h}×{w} by {factor}"
        )));
    }
    let (oh, ow) = (h / factor, w / factor);
    let norm = 1.0 / (factor * factor) as f32;
    let mut out = vec![0.0f32; c * oh * ow];
    for ch in 0..c {
        let plane = x.plane(ch);
        let o = &mut out[ch * oh * ow..(ch + 1) * oh * ow];
        for y in 0..h {
            let orow = &mut o[(y / factor) * ow..(y / factor + 1) * ow];
            for (xx, v) in plane[y * w..(y + 1) * w].iter().enumerate() {
                orow[xx / factor] += v;
            }
        }
        o.iter_mut().for_each(|v| *v *= norm);
    }
    Tensor::new(vec![c, oh, ow], out)
}

/// Source coordinate and blend weight for pixel-center (align-corners=false)
/// linear sampling.
fn linear_taps(out_len: usize, in_len: usize) -> Vec<(usize, usize, f32)> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(in_len - 1);
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, (src - i0 as f64) as f32)
        })
        .collect()
}

pub fn resize_bilinear(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (c, h, w) = x.dims3()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::Parameter(format!(
            "resize target {out_h}×{out_w} has a zero extent"
        )));
    }
    if h == 0 || w == 0 {
        return Err(Error::Parameter("cannot resize an empty map".into()));
    }
    if (h, w) == (out_h, out_w) {
        return Ok(x.clone());
    }
    let ys = linear_taps(out_h, h);
    let xs = linear_taps(out_w, w);
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let p = x.plane(ch);
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let top = p[y0 * w + x0] * (1.0 - fx) + p[y0 * w + x1] * fx;
                let bot = p[y1 * w + x0] * (1.0 - fx) + p[y1 * w + x1] * fx;
                out.push(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    Tensor::new(vec![c, out_h, out_w], out)
}

/// Pixel-center nearest source index: `floor((dst + 0.5) · in / out)`.
///
/// Upscaling followed by the reverse downscale maps every pixel back onto
/// itself, which is what makes mask round trips exact.
pub(crate) fn nearest_index(dst: usize, out_len: usize, in_len: usize) -> usize {
    (((2 * dst + 1) * in_len) / (2 * out_len)).min(in_len - 1)
}

pub fn resize_nearest_tensor(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (c, h, w) = x.dims3()?;
    if out_h == 0 || out_w == 0 || h == 0 || w == 0 {
        return Err(Error::Parameter(format!(
            "cannot resize {h}×{w} to {out_h}×{out_w}"
        )));
    }
    let ys: Vec<usize> = (0..out_h).map(|y| nearest_index(y, out_h, h)).collect();
    let xs: Vec<usize> = (0..out_w).map(|x| nearest_index(x, out_w, w)).collect();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let p = x.plane(ch);
        for &sy in &ys {
            out.extend(xs.iter().map(|&sx| p[sy * w + sx]));
        }
    }
    Tensor::new(vec![c, out_h, out_w], out)
}

/// Pad the bottom and right edges by replicating the last row/column.
pub fn pad_edge(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (c, h, w) = x.dims3()?;
    if out_h < h || out_w < w || h == 0 || w == 0 {
        return Err(Error::Dimension(format!(
            "cannot edge-pad {h}×{w} to {out_h}×{out_w}"
        )));
    }
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let p = x.plane(ch);
        for y in 0..out_h {
            let row = &p[y.min(h - 1) * w..(y.min(h - 1) + 1) * w];
            out.extend_from_slice(row);
            out.extend(std::iter::repeat(row[w - 1]).take(out_w - w));
        }
    }
    Tensor::new(vec![c, out_h, out_w], out)
}

/// Top-left `h × w` window of a `c × H × W` tensor.
pub fn crop(x: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let (c, ih, iw) = x.dims3()?;
    if h > ih || w > iw {
        return Err(Error::Dimension(format!(
            "cannot crop {ih}×{iw} to {h}×{w}"
        )));
    }
    let mut out = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        let p = x.plane(ch);
        for y in 0..h {
            out.extend_from_slice(&p[y * iw..y * iw + w]);
        }
    }
    Tensor::new(vec![c, h, w], out)
}

pub fn flip_horizontal(x: &Tensor) -> Result<Tensor> {
    let (_, _, w) = x.dims3()?;
    let mut out = x.clone();
    for row in out.data.chunks_mut(w) {
        row.reverse();
    }
    Ok(out)
}

/// Concatenate `c × h × w` tensors along the channel axis.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Parameter("nothing to concatenate".into()))?;
    let (_, h, w) = first.dims3()?;
    let mut c_total = 0;
    let mut data = Vec::new();
    for p in parts {
        let (c, ph, pw) = p.dims3()?;
        if (ph, pw) != (h, w) {
            return Err(Error::Dimension(format!(
                "cannot concatenate {ph}×{pw} with {h}×{w}"
            )));
        }
        c_total += c;
        data.extend_from_slice(p.data());
    }
    Tensor::new(vec![c_total, h, w], data)
}
