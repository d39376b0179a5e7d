//! Integer diagonalisation by unimodular row and column operations, with
//! checked `i128` arithmetic throughout.

use crate::error::{Error, Result};

/// Square integer matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    pub size: usize,
    pub data: Vec<i128>,
}

impl IntMatrix {
    pub fn new(size: usize, data: Vec<i128>) -> Self {
        assert_eq!(data.len(), size * size);
        IntMatrix { size, data }
    }

    pub fn identity(size: usize) -> Self {
        let mut data = vec![0; size * size];
        for i in 0..size {
            data[i * size + i] = 1;
        }
        IntMatrix { size, data }
    }

    pub fn get(&self, r: usize, c: usize) -> i128 {
        self.data[r * self.size + c]
    }

    pub fn checked_mul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        let n = self.size;
        let mut out = vec![0i128; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0i128;
                for k in 0..n {
                    let p = self.get(i, k).checked_mul(other.get(k, j)).ok_or(Error::IntegerOverflow("matrix power"))?;
                    s = s.checked_add(p).ok_or(Error::IntegerOverflow("matrix power"))?;
                }
                out[i * n + j] = s;
            }
        }
        Ok(IntMatrix::new(n, out))
    }

    pub fn checked_pow(&self, p: u32) -> Result<IntMatrix> {
        let mut out = IntMatrix::identity(self.size);
        for _ in 0..p {
            out = out.checked_mul(self)?;
        }
        Ok(out)
    }

    pub fn minus_identity(&self) -> Result<IntMatrix> {
        let mut out = self.clone();
        for i in 0..self.size {
            let v = &mut out.data[i * self.size + i];
            *v = v.checked_sub(1).ok_or(Error::IntegerOverflow("A^p - I"))?;
        }
        Ok(out)
    }

    /// Determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> Result<i128> {
        let n = self.size;
        let mut a = self.data.clone();
        let mut sign = 1i128;
        let mut prev = 1i128;
        for k in 0..n {
            if a[k * n + k] == 0 {
                match (k + 1..n).find(|&r| a[r * n + k] != 0) {
                    Some(r) => {
                        for c in 0..n {
                            a.swap(k * n + c, r * n + c);
                        }
                        sign = -sign;
                    }
                    None => return Ok(0),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let x = a[i * n + j].checked_mul(a[k * n + k]).ok_or(Error::IntegerOverflow("determinant"))?;
                    let y = a[i * n + k].checked_mul(a[k * n + j]).ok_or(Error::IntegerOverflow("determinant"))?;
                    a[i * n + j] = x.checked_sub(y).ok_or(Error::IntegerOverflow("determinant"))? / prev;
                }
            }
            prev = a[k * n + k];
        }
        Ok(sign * a[n * n - 1])
    }
}

/// Diagonal form `U M V = diag(d)` with unimodular `U`, `V`; only `V` is kept.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagonalization {
    pub diagonal: Vec<i128>,
    pub right: IntMatrix,
}

/// Reduces `m` to diagonal form by repeated Euclidean pivoting.
pub fn diagonalize(m: &IntMatrix) -> Result<Diagonalization> {
    let n = m.size;
    let mut a = m.data.clone();
    let mut v = IntMatrix::identity(n).data;
    let ovf = || Error::IntegerOverflow("integer diagonalisation");

    for t in 0..n {
        loop {
            // smallest nonzero entry in the trailing block becomes the pivot
            let mut pivot: Option<(usize, usize)> = None;
            for r in t..n {
                for c in t..n {
                    let x = a[r * n + c];
                    if x != 0 && pivot.is_none_or(|(pr, pc)| x.abs() < a[pr * n + pc].abs()) {
                        pivot = Some((r, c));
                    }
                }
            }
            let Some((pr, pc)) = pivot else { break };
            if pr != t {
                for c in 0..n {
                    a.swap(pr * n + c, t * n + c);
                }
            }
            if pc != t {
                for r in 0..n {
                    a.swap(r * n + pc, r * n + t);
                    v.swap(r * n + pc, r * n + t);
                }
            }
            let p = a[t * n + t];
            let mut clean = true;
            for r in t + 1..n {
                let q = a[r * n + t] / p;
                if q != 0 {
                    for c in t..n {
                        let d = q.checked_mul(a[t * n + c]).ok_or_else(ovf)?;
                        a[r * n + c] = a[r * n + c].checked_sub(d).ok_or_else(ovf)?;
                    }
                }
                clean &= a[r * n + t] == 0;
            }
            for c in t + 1..n {
                let q = a[t * n + c] / p;
                if q != 0 {
                    for r in 0..n {
                        let d = q.checked_mul(a[r * n + t]).ok_or_else(ovf)?;
                        a[r * n + c] = a[r * n + c].checked_sub(d).ok_or_else(ovf)?;
                        let dv = q.checked_mul(v[r * n + t]).ok_or_else(ovf)?;
                        v[r * n + c] = v[r * n + c].checked_sub(dv).ok_or_else(ovf)?;
                    }
                }
                clean &= a[t * n + c] == 0;
            }
            if clean {
                break;
            }
        }
    }
    Ok(Diagonalization { diagonal: (0..n).map(|i| a[i * n + i]).collect(), right: IntMatrix::new(n, v) })
}

/// All `x ∈ [0,1)^m` with `M x ∈ ℤ^m`, as numerators over the common denominator.
/// Returns `(denominator, numerators)`.
pub fn rational_kernel_mod_one(m: &IntMatrix) -> Result<(i128, Vec<Vec<i128>>)> {
    let n = m.size;
    let diag = diagonalize(m)?;
    if diag.diagonal.contains(&0) {
        return Err(Error::InvalidModel("A^p - I is singular; solution set is not finite".into()));
    }
    let dens: Vec<i128> = diag.diagonal.iter().map(|d| d.abs()).collect();
    let mut denom = 1i128;
    for &d in &dens {
        denom = lcm(denom, d).ok_or(Error::IntegerOverflow("denominator"))?;
    }
    let total: i128 = dens.iter().try_fold(1i128, |acc, &d| acc.checked_mul(d)).ok_or(Error::IntegerOverflow("point count"))?;
    if total > 10_000_000 {
        return Err(Error::IntegerOverflow("periodic point count exceeds enumeration limit"));
    }
    let mut out = Vec::with_capacity(total as usize);
    let mut w = vec![0i128; n];
    loop {
        // x = V (w_i / d_i), scaled to the common denominator and reduced mod 1
        let scaled: Vec<i128> = (0..n).map(|i| w[i] * (denom / dens[i])).collect();
        let mut num = vec![0i128; n];
        for r in 0..n {
            let mut s = 0i128;
            for c in 0..n {
                let p = diag.right.get(r, c).checked_mul(scaled[c]).ok_or(Error::IntegerOverflow("periodic point"))?;
                s = s.checked_add(p).ok_or(Error::IntegerOverflow("periodic point"))?;
            }
            num[r] = s.rem_euclid(denom);
        }
        out.push(num);
        let mut i = 0;
        loop {
            if i == n {
                out.sort();
                out.dedup();
                return Ok((denom, out));
            }
            w[i] += 1;
            if w[i] < dens[i] {
                break;
            }
            w[i] = 0;
            i += 1;
        }
    }
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn lcm(a: i128, b: i128) -> Option<i128> {
    (a / gcd(a, b)).checked_mul(b)
}
