//! Dense `M × K` arrays indexed by (base station, user).

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Row-major `num_bs × users_per_bs` array of per-link values.
#[derive(Debug, Clone, PartialEq)]
pub struct UserGrid {
    num_bs: usize,
    users_per_bs: usize,
    data: Vec<f64>,
}

impl UserGrid {
    pub fn filled(num_bs: usize, users_per_bs: usize, value: f64) -> Self {
        Self {
            num_bs,
            users_per_bs,
            data: vec![value; num_bs * users_per_bs],
        }
    }

    pub fn zeros(num_bs: usize, users_per_bs: usize) -> Self {
        Self::filled(num_bs, users_per_bs, 0.0)
    }

    pub fn from_vec(num_bs: usize, users_per_bs: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != num_bs * users_per_bs {
            return Err(Error::Shape(format!(
                "expected {} entries for a {num_bs}x{users_per_bs} grid, got {}",
                num_bs * users_per_bs,
                data.len()
            )));
        }
        Ok(Self {
            num_bs,
            users_per_bs,
            data,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_bs = rows.len();
        let users_per_bs = rows.first().map_or(0, Vec::len);
        if num_bs == 0 || users_per_bs == 0 {
            return Err(Error::Shape("empty grid".into()));
        }
        if rows.iter().any(|r| r.len() != users_per_bs) {
            return Err(Error::Shape("ragged grid rows".into()));
        }
        Ok(Self {
            num_bs,
            users_per_bs,
            data: rows.concat(),
        })
    }

    pub fn from_fn(num_bs: usize, users_per_bs: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(num_bs * users_per_bs);
        for m in 0..num_bs {
            for k in 0..users_per_bs {
                data.push(f(m, k));
            }
        }
        Self {
            num_bs,
            users_per_bs,
            data,
        }
    }

    pub fn num_bs(&self) -> usize {
        self.num_bs
    }

    pub fn users_per_bs(&self) -> usize {
        self.users_per_bs
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_bs, self.users_per_bs)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.data[m * self.users_per_bs + k]
    }

    #[inline]
    pub fn set(&mut self, m: usize, k: usize, value: f64) {
        self.data[m * self.users_per_bs + k] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.users_per_bs..(m + 1) * self.users_per_bs]
    }

    pub fn row_sum(&self, m: usize) -> f64 {
        self.row(m).iter().sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.num_bs).map(|m| self.row(m).to_vec()).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            num_bs: self.num_bs,
            users_per_bs: self.users_per_bs,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.shape(), other.shape());
        Self {
            num_bs: self.num_bs,
            users_per_bs: self.users_per_bs,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn check_shape(&self, num_bs: usize, users_per_bs: usize, what: &str) -> Result<()> {
        if self.shape() != (num_bs, users_per_bs) {
            return Err(Error::Shape(format!(
                "{what} is {}x{}, expected {num_bs}x{users_per_bs}",
                self.num_bs, self.users_per_bs
            )));
        }
        Ok(())
    }
}

impl Serialize for UserGrid {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for UserGrid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        UserGrid::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}
