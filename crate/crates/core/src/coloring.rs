//! Proper n-edge-colouring of the complete graph K_n for odd n.
//!
//! Vertex `v` colours the edges `{v-i, v+i}` for `i = 1..(n-1)/2`, indices
//! taken mod n with residue 0 mapped to n. Equivalently the colour of edge
//! `{a, b}` is `(a+b)·2⁻¹ mod n`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ColoringError {
    #[error("vertex count {0} must be odd and at least 3")]
    EvenOrSmall(usize),
    #[error("vertex {v} outside 1..={n}")]
    OutOfRange { v: usize, n: usize },
    #[error("edge endpoints must differ, got {0} twice")]
    Loop(usize),
}

fn check_n(n: usize) -> Result<(), ColoringError> {
    if n < 3 || n % 2 == 0 {
        return Err(ColoringError::EvenOrSmall(n));
    }
    Ok(())
}

fn check_v(v: usize, n: usize) -> Result<(), ColoringError> {
    if v == 0 || v > n {
        return Err(ColoringError::OutOfRange { v, n });
    }
    Ok(())
}

/// Reduces any integer into `1..=n`.
pub fn wrap(k: i64, n: usize) -> usize {
    let r = k.rem_euclid(n as i64) as usize;
    if r == 0 {
        n
    } else {
        r
    }
}

pub fn color_of(a: usize, b: usize, n: usize) -> Result<usize, ColoringError> {
    check_n(n)?;
    check_v(a, n)?;
    check_v(b, n)?;
    if a == b {
        return Err(ColoringError::Loop(a));
    }
    let inv2 = (n + 1) / 2;
    Ok(wrap(((a + b) * inv2 % n) as i64, n))
}

/// The pairs `(v-i, v+i)` for `i = 1..=(n-1)/2`, in that order.
pub fn edges_of_color(v: usize, n: usize) -> Result<Vec<(usize, usize)>, ColoringError> {
    check_n(n)?;
    check_v(v, n)?;
    Ok((1..=(n - 1) / 2)
        .map(|i| (wrap(v as i64 - i as i64, n), wrap((v + i) as i64, n)))
        .collect())
}

/// Full schedule: colour classes for `v = 1..=n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSchedule {
    n: usize,
    classes: Vec<Vec<(usize, usize)>>,
}

impl PairSchedule {
    pub fn new(n: usize) -> Result<Self, ColoringError> {
        check_n(n)?;
        let classes = (1..=n).map(|v| edges_of_color(v, n)).collect::<Result<_, _>>()?;
        Ok(PairSchedule { n, classes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn class(&self, v: usize) -> &[(usize, usize)] {
        &self.classes[v - 1]
    }

    pub fn color_of(&self, a: usize, b: usize) -> Result<usize, ColoringError> {
        color_of(a, b, self.n)
    }

    /// Text rows `v: a-b c-d …`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, class) in self.classes.iter().enumerate() {
            out.push_str(&format!("{}:", k + 1));
            for (a, b) in class {
                out.push_str(&format!(" {a}-{b}"));
            }
            out.push('\n');
        }
        out
    }

    /// Exhaustively checks properness, matching structure and the
    /// partition of all `C(n,2)` edges; returns a description of the first
    /// defect found.
    pub fn verify(&self) -> Result<(), String> {
        let n = self.n;
        let mut seen = vec![vec![0usize; n + 1]; n + 1];
        for (k, class) in self.classes.iter().enumerate() {
            let v = k + 1;
            if class.len() != (n - 1) / 2 {
                return Err(format!("colour {v} has {} edges", class.len()));
            }
            let mut touched = vec![false; n + 1];
            for &(a, b) in class {
                if a == v || b == v {
                    return Err(format!("colour {v} contains its own vertex"));
                }
                if touched[a] || touched[b] {
                    return Err(format!("colour {v} is not a matching"));
                }
                touched[a] = true;
                touched[b] = true;
                seen[a.min(b)][a.max(b)] += 1;
                if color_of(a, b, n).map_err(|e| e.to_string())? != v {
                    return Err(format!("edge {{{a},{b}}} listed under {v} but coloured otherwise"));
                }
            }
        }
        for a in 1..=n {
            for b in a + 1..=n {
                if seen[a][b] != 1 {
                    return Err(format!("edge {{{a},{b}}} covered {} times", seen[a][b]));
                }
            }
        }
        Ok(())
    }
}
