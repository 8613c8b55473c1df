use num_complex::Complex64;

use crate::autodiff::{Shape, Tensor};
use crate::error::{dim_err, Result};

macro_rules! complex_grid {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            height: usize,
            width: usize,
            data: Vec<Complex64>,
        }

        impl $name {
            pub fn new(height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
                if data.len() != height * width {
                    return dim_err(format!(
                        "{}x{} grid needs {} values, got {}",
                        height,
                        width,
                        height * width,
                        data.len()
                    ));
                }
                Ok($name { height, width, data })
            }

            pub fn zeros(height: usize, width: usize) -> Self {
                $name { height, width, data: vec![Complex64::new(0.0, 0.0); height * width] }
            }

            pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
                let mut data = Vec::with_capacity(height * width);
                for y in 0..height {
                    for x in 0..width {
                        data.push(f(y, x));
                    }
                }
                $name { height, width, data }
            }

            pub fn height(&self) -> usize {
                self.height
            }

            pub fn width(&self) -> usize {
                self.width
            }

            pub fn dims(&self) -> (usize, usize) {
                (self.height, self.width)
            }

            pub fn data(&self) -> &[Complex64] {
                &self.data
            }

            pub fn data_mut(&mut self) -> &mut [Complex64] {
                &mut self.data
            }

            pub fn into_data(self) -> Vec<Complex64> {
                self.data
            }

            pub fn at(&self, y: usize, x: usize) -> Complex64 {
                self.data[y * self.width + x]
            }

            pub fn norm_sqr(&self) -> f64 {
                self.data.iter().map(|z| z.norm_sqr()).sum()
            }

            pub fn norm(&self) -> f64 {
                self.norm_sqr().sqrt()
            }

            /// `⟨self, other⟩ = Σ self·conj(other)`.
            pub fn dot(&self, other: &Self) -> Complex64 {
                self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).sum()
            }

            pub fn max_abs(&self) -> f64 {
                self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
            }

            pub fn is_finite(&self) -> bool {
                self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            }

            pub fn check_same_dims(&self, other_dims: (usize, usize), what: &str) -> Result<()> {
                if self.dims() != other_dims {
                    return dim_err(format!(
                        "{what}: {}x{} vs {}x{}",
                        self.height, self.width, other_dims.0, other_dims.1
                    ));
                }
                Ok(())
            }

            /// Elementwise `a·self + b·other`.
            pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
                let data = self.data.iter().zip(&other.data).map(|(x, y)| x * a + y * b).collect();
                $name { height: self.height, width: self.width, data }
            }

            pub fn scaled(&self, s: f64) -> Self {
                $name { height: self.height, width: self.width, data: self.data.iter().map(|z| z * s).collect() }
            }

            /// `(1, 2, H, W)` view: channel 0 real, channel 1 imaginary.
            pub fn to_tensor(&self) -> Tensor {
                let mut buf = vec![0.0; 2 * self.data.len()];
                write_planar(&self.data, &mut buf);
                Tensor::new(Shape::new(1, 2, self.height, self.width), buf).expect("sized to fit")
            }

            pub fn from_tensor(t: &Tensor) -> Result<Self> {
                let s = t.shape();
                if s.n != 1 || s.c != 2 {
                    return dim_err(format!("expected a (1,2,H,W) tensor, got {s}"));
                }
                Self::from_planar(s.h, s.w, t.data())
            }

            pub fn from_planar(height: usize, width: usize, buf: &[f64]) -> Result<Self> {
                if buf.len() != 2 * height * width {
                    return dim_err("planar buffer length does not match grid size");
                }
                let mut data = vec![Complex64::new(0.0, 0.0); height * width];
                read_planar(buf, &mut data);
                Ok($name { height, width, data })
            }
        }
    };
}

complex_grid!(
    /// An `H×W` complex image, row-major.
    ComplexImage
);

complex_grid!(
    /// `H×W` Fourier-domain samples with DC at index `(0, 0)`; unsampled
    /// locations hold zero.
    KSpaceData
);

pub(crate) fn write_planar(data: &[Complex64], buf: &mut [f64]) {
    let n = data.len();
    let (re, im) = buf.split_at_mut(n);
    for (i, z) in data.iter().enumerate() {
        re[i] = z.re;
        im[i] = z.im;
    }
}

pub(crate) fn read_planar(buf: &[f64], data: &mut [Complex64]) {
    let n = data.len();
    let (re, im) = buf.split_at(n);
    for (i, z) in data.iter_mut().enumerate() {
        *z = Complex64::new(re[i], im[i]);
    }
}

impl ComplexImage {
    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }
}
