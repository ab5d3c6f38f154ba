//! Forward and backward kernels. All convolutions are stride 1 with zero
//! "same" padding, computed as im2col followed by a matrix product.

use super::tensor::Tensor;
use crate::error::{Error, Result};

fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the strides describe matrices that lie inside the given slices
    // (checked by the callers' shape arithmetic) and `c` does not alias.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Rows `(ci, ky, kx)`, columns `(y, x)`.
fn im2col(x: &Tensor, k: usize) -> Vec<f64> {
    let (cin, h, w) = x.chw();
    let hw = h * w;
    let p = (k / 2) as isize;
    let mut cols = vec![0.0; cin * k * k * hw];
    let src = x.data();
    for ci in 0..cin {
        let plane = &src[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut cols[((ci * k + ky) * k + kx) * hw..][..hw];
                let dy = ky as isize - p;
                let dx = kx as isize - p;
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize || x0 >= x1 {
                        continue;
                    }
                    let s0 = (sy as usize) * w;
                    let dst = &mut row[y * w + x0..y * w + x1];
                    let sx0 = (x0 as isize + dx) as usize;
                    dst.copy_from_slice(&plane[s0 + sx0..s0 + sx0 + (x1 - x0)]);
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], cin: usize, h: usize, w: usize, k: usize) -> Tensor {
    let hw = h * w;
    let p = (k / 2) as isize;
    let mut out = Tensor::zeros(&[cin, h, w]);
    let dst = out.data_mut();
    for ci in 0..cin {
        let plane = &mut dst[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &cols[((ci * k + ky) * k + kx) * hw..][..hw];
                let dy = ky as isize - p;
                let dx = kx as isize - p;
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize || x0 >= x1 {
                        continue;
                    }
                    let s0 = (sy as usize) * w;
                    let sx0 = (x0 as isize + dx) as usize;
                    let target = &mut plane[s0 + sx0..s0 + sx0 + (x1 - x0)];
                    for (t, s) in target.iter_mut().zip(&row[y * w + x0..y * w + x1]) {
                        *t += s;
                    }
                }
            }
        }
    }
    out
}

/// `weight` is `(cout, cin, k, k)` flattened, `bias` has `cout` entries.
pub fn conv2d(x: &Tensor, weight: &[f64], bias: &[f64], k: usize) -> Tensor {
    let (cin, h, w) = x.chw();
    let cout = bias.len();
    let kk = cin * k * k;
    assert_eq!(weight.len(), cout * kk, "conv weight shape");
    let hw = h * w;
    let mut out = Tensor::zeros(&[cout, h, w]);
    let y = out.data_mut();
    for (co, &b) in bias.iter().enumerate() {
        y[co * hw..(co + 1) * hw].iter_mut().for_each(|v| *v = b);
    }
    if k == 1 {
        gemm(cout, cin, hw, weight, (cin, 1), x.data(), (hw, 1), 1.0, y);
    } else {
        let cols = im2col(x, k);
        gemm(cout, kk, hw, weight, (kk, 1), &cols, (hw, 1), 1.0, y);
    }
    out
}

pub struct ConvGrads {
    pub dx: Option<Tensor>,
    pub dw: Option<(Vec<f64>, Vec<f64>)>,
}

pub fn conv2d_backward(x: &Tensor, weight: &[f64], cout: usize, k: usize, dy: &Tensor, need_dx: bool, need_dw: bool) -> ConvGrads {
    let (cin, h, w) = x.chw();
    let hw = h * w;
    let kk = cin * k * k;
    let g = dy.data();
    let cols_owned;
    let cols: &[f64] = if k == 1 {
        x.data()
    } else if need_dw {
        cols_owned = im2col(x, k);
        &cols_owned
    } else {
        &[]
    };
    let dw = need_dw.then(|| {
        let mut dw = vec![0.0; cout * kk];
        gemm(cout, hw, kk, g, (hw, 1), cols, (1, hw), 0.0, &mut dw);
        let db = (0..cout).map(|co| g[co * hw..(co + 1) * hw].iter().sum()).collect();
        (dw, db)
    });
    let dx = need_dx.then(|| {
        let mut dcols = vec![0.0; kk * hw];
        gemm(kk, cout, hw, weight, (1, kk), g, (hw, 1), 0.0, &mut dcols);
        if k == 1 {
            Tensor::from_vec(&[cin, h, w], dcols).expect("shape")
        } else {
            col2im(&dcols, cin, h, w, k)
        }
    });
    ConvGrads { dx, dw }
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    y
}

pub fn relu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    let data = x.data().iter().zip(dy.data()).map(|(&a, &g)| if a > 0.0 { g } else { 0.0 }).collect();
    Tensor::from_vec(x.shape(), data).expect("shape")
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = 1.0 / (1.0 + (-*v).exp()));
    y
}

pub fn sigmoid_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    let data = y.data().iter().zip(dy.data()).map(|(&s, &g)| g * s * (1.0 - s)).collect();
    Tensor::from_vec(y.shape(), data).expect("shape")
}

/// 2x2 max pooling; `argmax` holds the flat input index of each maximum
/// (first in row-major order on ties).
pub fn maxpool2(x: &Tensor) -> (Tensor, Vec<u32>) {
    let (c, h, w) = x.chw();
    let (ho, wo) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[c, ho, wo]);
    let mut arg = vec![0u32; c * ho * wo];
    let src = x.data();
    let dst = out.data_mut();
    for ch in 0..c {
        for y in 0..ho {
            for xx in 0..wo {
                let base = ch * h * w + 2 * y * w + 2 * xx;
                let mut best = base;
                for cand in [base + 1, base + w, base + w + 1] {
                    if src[cand] > src[best] {
                        best = cand;
                    }
                }
                let o = (ch * ho + y) * wo + xx;
                dst[o] = src[best];
                arg[o] = best as u32;
            }
        }
    }
    (out, arg)
}

pub fn maxpool2_backward(input_shape: &[usize], argmax: &[u32], dy: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(input_shape);
    let d = dx.data_mut();
    for (&i, &g) in argmax.iter().zip(dy.data()) {
        d[i as usize] += g;
    }
    dx
}

/// Nearest-neighbor 2x upsampling.
pub fn upsample2(x: &Tensor) -> Tensor {
    let (c, h, w) = x.chw();
    let (ho, wo) = (2 * h, 2 * w);
    let mut out = Tensor::zeros(&[c, ho, wo]);
    let src = x.data();
    let dst = out.data_mut();
    for ch in 0..c {
        for y in 0..ho {
            let srow = &src[(ch * h + y / 2) * w..][..w];
            let drow = &mut dst[(ch * ho + y) * wo..][..wo];
            for (xx, v) in drow.iter_mut().enumerate() {
                *v = srow[xx / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward(dy: &Tensor) -> Tensor {
    let (c, ho, wo) = dy.chw();
    let (h, w) = (ho / 2, wo / 2);
    let mut dx = Tensor::zeros(&[c, h, w]);
    let g = dy.data();
    let d = dx.data_mut();
    for ch in 0..c {
        for y in 0..ho {
            for xx in 0..wo {
                d[(ch * h + y / 2) * w + xx / 2] += g[(ch * ho + y) * wo + xx];
            }
        }
    }
    dx
}

pub fn concat(parts: &[&Tensor]) -> Result<Tensor> {
    let (_, h, w) = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to concatenate".into()))?
        .chw();
    let mut channels = 0;
    let mut data = Vec::new();
    for p in parts {
        let (c, ph, pw) = p.chw();
        if (ph, pw) != (h, w) {
            return Err(Error::ShapeMismatch(format!("concat {ph}x{pw} with {h}x{w}")));
        }
        channels += c;
        data.extend_from_slice(p.data());
    }
    Tensor::from_vec(&[channels, h, w], data)
}

pub fn split_channels(dy: &Tensor, channels: &[usize]) -> Vec<Tensor> {
    let (_, h, w) = dy.chw();
    let mut offset = 0;
    channels
        .iter()
        .map(|&c| {
            let part = dy.data()[offset * h * w..(offset + c) * h * w].to_vec();
            offset += c;
            Tensor::from_vec(&[c, h, w], part).expect("shape")
        })
        .collect()
}

/// Multiplies every channel of `x` pixel-wise by the single-channel `map`.
pub fn scale_by_map(x: &Tensor, map: &Tensor) -> Result<Tensor> {
    let (c, h, w) = x.chw();
    if map.chw() != (1, h, w) {
        return Err(Error::ShapeMismatch(format!(
            "scale map {:?} for features {:?}",
            map.shape(),
            x.shape()
        )));
    }
    let hw = h * w;
    let m = map.data();
    let mut y = x.clone();
    for ch in 0..c {
        for (v, s) in y.data_mut()[ch * hw..(ch + 1) * hw].iter_mut().zip(m) {
            *v *= s;
        }
    }
    Ok(y)
}

pub fn scale_by_map_backward(x: &Tensor, map: &Tensor, dy: &Tensor) -> (Tensor, Tensor) {
    let (c, h, w) = x.chw();
    let hw = h * w;
    let dx = scale_by_map(dy, map).expect("checked in forward");
    let mut dm = Tensor::zeros(&[1, h, w]);
    let d = dm.data_mut();
    for ch in 0..c {
        let xs = &x.data()[ch * hw..(ch + 1) * hw];
        let gs = &dy.data()[ch * hw..(ch + 1) * hw];
        for i in 0..hw {
            d[i] += gs[i] * xs[i];
        }
    }
    (dx, dm)
}

/// Confidence-weighted fusion: color features followed by depth features
/// scaled pixel-wise by the confidence map.
pub fn fuse(fc: &Tensor, fd: &Tensor, c: &Tensor) -> Result<Tensor> {
    let (_, h, w) = fc.chw();
    let (_, hd, wd) = fd.chw();
    if (h, w) != (hd, wd) {
        return Err(Error::ShapeMismatch(format!("fuse {h}x{w} color with {hd}x{wd} depth")));
    }
    concat(&[fc, &scale_by_map(fd, c)?])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Direct nested-loop convolution.
    fn conv_naive(x: &Tensor, wt: &[f64], b: &[f64], k: usize) -> Tensor {
        let (cin, h, w) = x.chw();
        let cout = b.len();
        let p = (k / 2) as isize;
        let mut out = Tensor::zeros(&[cout, h, w]);
        for co in 0..cout {
            for y in 0..h {
                for xx in 0..w {
                    let mut acc = b[co];
                    for ci in 0..cin {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = y as isize + ky as isize - p;
                                let sx = xx as isize + kx as isize - p;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                    continue;
                                }
                                acc += wt[((co * cin + ci) * k + ky) * k + kx]
                                    * x.data()[(ci * h + sy as usize) * w + sx as usize];
                            }
                        }
                    }
                    out.data_mut()[(co * h + y) * w + xx] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(cin, cout, h, w, k) in &[(3, 4, 5, 7, 3), (2, 3, 4, 4, 1), (1, 1, 1, 1, 3), (5, 2, 8, 3, 3)] {
            let x = random(&[cin, h, w], &mut rng);
            let wt = random(&[cout * cin * k * k], &mut rng).into_data();
            let b = random(&[cout], &mut rng).into_data();
            let fast = conv2d(&x, &wt, &b, k);
            let slow = conv_naive(&x, &wt, &b, k);
            for (a, s) in fast.data().iter().zip(slow.data()) {
                assert!((a - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conv_backward_is_the_adjoint() {
        // <dy, conv(x)> is bilinear: check dx and dw against the transposed
        // forward evaluated on basis directions.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (cin, cout, h, w, k) = (2, 3, 4, 5, 3);
        let x = random(&[cin, h, w], &mut rng);
        let wt = random(&[cout * cin * k * k], &mut rng).into_data();
        let zero_b = vec![0.0; cout];
        let dy = random(&[cout, h, w], &mut rng);
        let g = conv2d_backward(&x, &wt, cout, k, &dy, true, true);
        let dot = |a: &Tensor| a.data().iter().zip(dy.data()).map(|(p, q)| p * q).sum::<f64>();
        let dx = g.dx.unwrap();
        for i in 0..x.len() {
            let mut e = Tensor::zeros(x.shape());
            e.data_mut()[i] = 1.0;
            assert!((dot(&conv2d(&e, &wt, &zero_b, k)) - dx.data()[i]).abs() < 1e-12);
        }
        let (dw, db) = g.dw.unwrap();
        for i in 0..wt.len() {
            let mut e = vec![0.0; wt.len()];
            e[i] = 1.0;
            assert!((dot(&conv2d(&x, &e, &zero_b, k)) - dw[i]).abs() < 1e-12);
        }
        for co in 0..cout {
            let s: f64 = dy.channel(co).iter().sum();
            assert!((s - db[co]).abs() < 1e-12);
        }
    }

    #[test]
    fn pooling_and_upsampling() {
        let x = Tensor::from_vec(&[1, 2, 4], vec![1.0, 5.0, 2.0, 2.0, 3.0, 0.0, 2.0, 1.0]).unwrap();
        let (y, arg) = maxpool2(&x);
        assert_eq!(y.data(), &[5.0, 2.0]);
        assert_eq!(arg, vec![1, 2]);
        let dx = maxpool2_backward(x.shape(), &arg, &Tensor::from_vec(&[1, 1, 2], vec![1.0, 2.0]).unwrap());
        assert_eq!(dx.data(), &[0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let up = upsample2(&y);
        assert_eq!(up.data(), &[5.0, 5.0, 2.0, 2.0, 5.0, 5.0, 2.0, 2.0]);
        assert_eq!(upsample2_backward(&up).data(), &[20.0, 8.0]);
    }

    #[test]
    fn fuse_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fc = random(&[8, 4, 4], &mut rng);
        let fd = random(&[8, 4, 4], &mut rng);
        let zero = fuse(&fc, &fd, &Tensor::zeros(&[1, 4, 4])).unwrap();
        assert_eq!(zero.shape(), &[16, 4, 4]);
        assert_eq!(&zero.data()[..128], fc.data());
        assert!(zero.data()[128..].iter().all(|&v| v == 0.0));
        let one = fuse(&fc, &fd, &Tensor::filled(&[1, 4, 4], 1.0)).unwrap();
        assert_eq!(one, concat(&[&fc, &fd]).unwrap());
        assert!(fuse(&fc, &fd, &Tensor::zeros(&[2, 4, 4])).is_err());
        assert!(fuse(&fc, &random(&[8, 2, 2], &mut rng), &Tensor::zeros(&[1, 4, 4])).is_err());
    }
}
