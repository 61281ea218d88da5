//! Magic rectangle games: specs, win predicates and an exact classical
//! value oracle.

use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper limit on win checks performed by [`classical_value`].
pub const CLASSICAL_CHECK_CAP: u128 = 1_000_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("sign {0} is not ±1")]
    BadSign(i64),
    #[error("table dimensions must be positive, got {m}×{n}")]
    EmptyTable { m: usize, n: usize },
    #[error("expected {expected} signs, got {got}")]
    SignCount { expected: usize, got: usize },
    #[error("brute force needs about {needed} win checks, cap is {cap}")]
    TooLarge { needed: u128, cap: u128 },
    #[error("column count {0} must be odd")]
    EvenColumns(usize),
    #[error("input out of range: {0}")]
    Input(String),
    #[error("malformed answer: {0}")]
    Malformed(String),
    #[error("cannot parse game spec: {0}")]
    Parse(String),
}

/// `m×n` table with required row products `alpha` and column products `beta`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSpec {
    pub m: usize,
    pub n: usize,
    pub alpha: Vec<i8>,
    pub beta: Vec<i8>,
}

impl GameSpec {
    pub fn new(alpha: Vec<i8>, beta: Vec<i8>) -> Result<Self, GameError> {
        let spec = GameSpec { m: alpha.len(), n: beta.len(), alpha, beta };
        spec.check_shape()?;
        Ok(spec)
    }

    /// Rows multiply to +1, columns to -1.
    pub fn magic_square() -> Self {
        GameSpec { m: 3, n: 3, alpha: vec![1; 3], beta: vec![-1; 3] }
    }

    /// The 3×n game used by the self-test (n odd).
    pub fn magic_rectangle(n: usize) -> Self {
        GameSpec { m: 3, n, alpha: vec![1; 3], beta: vec![-1; n] }
    }

    fn check_shape(&self) -> Result<(), GameError> {
        if self.m == 0 || self.n == 0 {
            return Err(GameError::EmptyTable { m: self.m, n: self.n });
        }
        if self.alpha.len() != self.m {
            return Err(GameError::SignCount { expected: self.m, got: self.alpha.len() });
        }
        if self.beta.len() != self.n {
            return Err(GameError::SignCount { expected: self.n, got: self.beta.len() });
        }
        for &s in self.alpha.iter().chain(&self.beta) {
            if s != 1 && s != -1 {
                return Err(GameError::BadSign(s as i64));
            }
        }
        Ok(())
    }

    /// Text form: `m n`, then the alpha signs, then the beta signs.
    pub fn to_text(&self) -> String {
        let signs = |v: &[i8]| v.iter().map(|&s| format!("{s:+}")).collect::<Vec<_>>().join(" ");
        format!("{} {}\n{}\n{}\n", self.m, self.n, signs(&self.alpha), signs(&self.beta))
    }
}

impl FromStr for GameSpec {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lines: Vec<&str> = s
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .collect();
        if lines.len() != 3 {
            return Err(GameError::Parse(format!("expected 3 records, found {}", lines.len())));
        }
        let dims: Vec<usize> = lines[0]
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| GameError::Parse(format!("bad dimension `{t}`"))))
            .collect::<Result<_, _>>()?;
        if dims.len() != 2 {
            return Err(GameError::Parse("first record must be `m n`".into()));
        }
        let signs = |line: &str| -> Result<Vec<i8>, GameError> {
            line.split_whitespace()
                .map(|t| match t {
                    "+" | "+1" | "1" => Ok(1),
                    "-" | "-1" => Ok(-1),
                    _ => Err(GameError::Parse(format!("bad sign `{t}`"))),
                })
                .collect()
        };
        let spec = GameSpec { m: dims[0], n: dims[1], alpha: signs(lines[1])?, beta: signs(lines[2])? };
        spec.check_shape()?;
        Ok(spec)
    }
}

/// True iff the product of all row and column signs is -1.
pub fn validate_spec(spec: &GameSpec) -> bool {
    spec.check_shape().is_ok()
        && spec.alpha.iter().chain(&spec.beta).map(|&s| s as i32).product::<i32>() == -1
}

/// The 3×n game with odd n, answered through Alice's `a_k` encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MagicGame3xN {
    n: usize,
}

impl MagicGame3xN {
    pub fn new(n: usize) -> Result<Self, GameError> {
        if n % 2 == 0 || n == 0 {
            return Err(GameError::EvenColumns(n));
        }
        Ok(MagicGame3xN { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The self-test pair checks need `n = 3` or `n ≡ 3 (mod 4)`.
    pub fn supports_self_test(&self) -> bool {
        self.n == 3 || self.n % 4 == 3
    }

    /// Alice's row cells `p_j = ∏_{k≠j} a_k`.
    pub fn row_from_answers(a: &[i8]) -> Vec<i8> {
        let total: i8 = a.iter().product();
        a.iter().map(|&ak| total * ak).collect()
    }

    pub fn accept(&self, x: usize, y: usize, a: &[i8], b: &[i8]) -> Result<bool, GameError> {
        game_round_accept(self.n, x, y, a, b)
    }
}

fn check_pm(v: &[i8], what: &str) -> Result<(), GameError> {
    if let Some(&s) = v.iter().find(|&&s| s != 1 && s != -1) {
        return Err(GameError::Malformed(format!("{what} contains {s}")));
    }
    Ok(())
}

/// Win predicate `∏_{k≠y} a_k = b_x`. Answers violating `b₁b₂b₃ = -1` or
/// with the wrong arity are reported as [`GameError::Malformed`].
pub fn game_round_accept(n: usize, x: usize, y: usize, a: &[i8], b: &[i8]) -> Result<bool, GameError> {
    if !(1..=3).contains(&x) {
        return Err(GameError::Input(format!("x = {x}")));
    }
    if y == 0 || y > n {
        return Err(GameError::Input(format!("y = {y} with n = {n}")));
    }
    if a.len() != n {
        return Err(GameError::Malformed(format!("Alice sent {} bits, expected {n}", a.len())));
    }
    if b.len() != 3 {
        return Err(GameError::Malformed(format!("Bob sent {} bits, expected 3", b.len())));
    }
    check_pm(a, "a")?;
    check_pm(b, "b")?;
    if b.iter().product::<i8>() != -1 {
        return Err(GameError::Malformed("b₁b₂b₃ = +1".into()));
    }
    let lhs: i8 = a.iter().enumerate().filter(|(k, _)| k + 1 != y).map(|(_, &s)| s).product();
    Ok(lhs == b[x - 1])
}

/// All `±1` vectors of length `len` with product `sign`.
fn fillings(len: usize, sign: i8) -> Vec<Vec<i8>> {
    (0u32..1 << len)
        .filter(|m| if sign == 1 { m.count_ones() % 2 == 0 } else { m.count_ones() % 2 == 1 })
        .map(|m| (0..len).map(|k| if m >> k & 1 == 1 { -1 } else { 1 }).collect())
        .collect()
}

/// Exact optimal classical winning probability under uniform inputs.
///
/// Enumerates the deterministic strategies of whichever player has fewer,
/// and lets the other player best-respond per question.
pub fn classical_value(spec: &GameSpec) -> Result<Ratio<u64>, GameError> {
    spec.check_shape()?;
    let (m, n) = (spec.m, spec.n);
    // Transposing swaps the players' roles without changing the value.
    let alice_count = (1u128 << (n - 1)).checked_pow(m as u32);
    let bob_count = (1u128 << (m - 1)).checked_pow(n as u32);
    let transpose = match (alice_count, bob_count) {
        (Some(a), Some(b)) => b < a,
        (None, Some(_)) => true,
        _ => false,
    };
    let (rows, cols, alpha, beta) = if transpose {
        (n, m, &spec.beta, &spec.alpha)
    } else {
        (m, n, &spec.alpha, &spec.beta)
    };
    let count = (1u128 << (cols - 1)).checked_pow(rows as u32);
    let per = (cols as u128) * (1u128 << (rows - 1)) * rows as u128;
    let needed = count.and_then(|c| c.checked_mul(per)).unwrap_or(u128::MAX);
    if needed > CLASSICAL_CHECK_CAP {
        return Err(GameError::TooLarge { needed, cap: CLASSICAL_CHECK_CAP });
    }
    let row_opts: Vec<Vec<Vec<i8>>> = alpha.iter().map(|&s| fillings(cols, s)).collect();
    let col_opts: Vec<Vec<Vec<i8>>> = beta.iter().map(|&s| fillings(rows, s)).collect();
    let mut choice = vec![0usize; rows];
    let mut best = 0u64;
    loop {
        let mut wins = 0u64;
        for (j, opts) in col_opts.iter().enumerate() {
            let top = opts
                .iter()
                .map(|c| (0..rows).filter(|&i| row_opts[i][choice[i]][j] == c[i]).count())
                .max()
                .unwrap_or(0);
            wins += top as u64;
        }
        best = best.max(wins);
        // odometer over row fillings
        let mut k = 0;
        loop {
            if k == rows {
                return Ok(Ratio::new(best, (m * n) as u64));
            }
            choice[k] += 1;
            if choice[k] < row_opts[k].len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

/// Value of a concrete "shared table" strategy: both players follow one
/// table whose rows obey `alpha`; Bob repairs each column violating `beta`
/// by flipping its first cell. A lower bound on [`classical_value`].
pub fn constant_table_value(spec: &GameSpec) -> Result<Ratio<u64>, GameError> {
    spec.check_shape()?;
    let (m, n) = (spec.m, spec.n);
    let mut t = vec![vec![1i8; n]; m];
    for j in 0..n {
        t[0][j] = spec.beta[j];
    }
    for i in 0..m {
        let prod: i8 = t[i].iter().product();
        if prod != spec.alpha[i] {
            t[i][n - 1] = -t[i][n - 1];
        }
    }
    let mut wins = 0u64;
    for j in 0..n {
        let mut col: Vec<i8> = (0..m).map(|i| t[i][j]).collect();
        if col.iter().product::<i8>() != spec.beta[j] {
            col[0] = -col[0];
        }
        wins += (0..m).filter(|&i| col[i] == t[i][j]).count() as u64;
    }
    Ok(Ratio::new(wins, (m * n) as u64))
}
