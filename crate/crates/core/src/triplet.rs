//! ABX triplet sampling.
//!
//! For an unordered pair the two languages take turns as the X language:
//! triplet `i` uses `lang1` as X language when `i` is even and `lang2` when
//! it is odd. Writing P for the X language and Q for the other one:
//!
//! | mode        | X        | A        | B                         |
//! |-------------|----------|----------|---------------------------|
//! | LD          | (P, M1)  | (P, M2)  | (Q, M2)                   |
//! | MD          | (P, M1)  | (Q, M1)  | (Q, M2)                   |
//! | BASELINE_LD | (P, M1)  | (P, M2)  | (P, M3)                   |
//! | BASELINE_MD | (P, M1)  | (Q, M1)  | (R, M1), R ∉ {P, Q}       |
//!
//! Meanings within a triplet are pairwise distinct. BASELINE_MD falls back
//! to B = A when no third language carries M1. Within a direction, sampling
//! is uniform with replacement over the valid combinations, which are exactly
//! the ones [`enumerate_all_triplets`] yields.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::AlignmentIndex;
use crate::error::{AbxError, Result};
use crate::rng::StreamRng;

pub const DEFAULT_ENUMERATION_CAP: u128 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TripletMode {
    #[serde(rename = "ld")]
    Ld,
    #[serde(rename = "md")]
    Md,
    #[serde(rename = "baseline-ld")]
    BaselineLd,
    #[serde(rename = "baseline-md")]
    BaselineMd,
}

impl TripletMode {
    pub const ALL: [TripletMode; 4] = [
        TripletMode::Ld,
        TripletMode::Md,
        TripletMode::BaselineLd,
        TripletMode::BaselineMd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TripletMode::Ld => "ld",
            TripletMode::Md => "md",
            TripletMode::BaselineLd => "baseline-ld",
            TripletMode::BaselineMd => "baseline-md",
        }
    }

    /// Stable numeric code used as seed material.
    pub fn code(self) -> u64 {
        match self {
            TripletMode::Ld => 1,
            TripletMode::Md => 2,
            TripletMode::BaselineLd => 3,
            TripletMode::BaselineMd => 4,
        }
    }

    /// Number of distinct shared meanings a pair needs for this mode.
    pub fn min_shared(self) -> usize {
        match self {
            TripletMode::BaselineLd => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for TripletMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TripletMode {
    type Err = AbxError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ld" => Ok(TripletMode::Ld),
            "md" => Ok(TripletMode::Md),
            "baseline-ld" => Ok(TripletMode::BaselineLd),
            "baseline-md" => Ok(TripletMode::BaselineMd),
            other => Err(AbxError::InvalidRequest(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SentenceRef<'a> {
    pub language: &'a str,
    pub meaning_id: u64,
}

impl<'a> SentenceRef<'a> {
    fn new(language: &'a str, meaning_id: u64) -> Self {
        SentenceRef {
            language,
            meaning_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet<'a> {
    pub mode: TripletMode,
    pub x: SentenceRef<'a>,
    pub a: SentenceRef<'a>,
    pub b: SentenceRef<'a>,
    /// True when the pair's first language supplies X.
    pub x_is_lang1: bool,
}

impl Triplet<'_> {
    pub fn to_dump(&self) -> TripletDump {
        let r = |s: &SentenceRef| (s.language.to_string(), s.meaning_id);
        TripletDump {
            mode: self.mode,
            x: r(&self.x),
            a: r(&self.a),
            b: r(&self.b),
        }
    }
}

/// One line of the audit dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletDump {
    pub mode: TripletMode,
    pub x: (String, u64),
    pub a: (String, u64),
    pub b: (String, u64),
}

pub fn write_triplet_dump<'a, W: Write>(
    out: &mut W,
    triplets: impl IntoIterator<Item = Triplet<'a>>,
) -> std::io::Result<()> {
    for t in triplets {
        serde_json::to_writer(&mut *out, &t.to_dump())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Everything the sampler and the enumerator share about one (mode, pair).
#[derive(Debug, Clone)]
struct PairPlan<'a> {
    mode: TripletMode,
    lang1: &'a str,
    lang2: &'a str,
    shared: Vec<u64>,
    /// BASELINE_MD only: (M1, third language or None for the B = A fallback).
    constant_meaning: Vec<(u64, Option<&'a str>)>,
}

impl<'a> PairPlan<'a> {
    fn new(index: &'a AlignmentIndex, mode: TripletMode, lang1: &str, lang2: &str) -> Result<Self> {
        let p1 = index.language_position(lang1)?;
        let p2 = index.language_position(lang2)?;
        if p1 == p2 {
            return Err(AbxError::InvalidRequest(format!(
                "mode {mode} needs two distinct languages, got {lang1} twice"
            )));
        }
        let lang1 = index.languages()[p1].as_str();
        let lang2 = index.languages()[p2].as_str();
        let shared = index.shared_meanings(lang1, lang2)?;
        if shared.len() < mode.min_shared() {
            return Err(AbxError::PairSkipped {
                lang1: lang1.to_string(),
                lang2: lang2.to_string(),
                shared: shared.len(),
                required: mode.min_shared(),
            });
        }
        let constant_meaning = if mode == TripletMode::BaselineMd {
            let mut v = Vec::new();
            for &m in &shared {
                let before = v.len();
                for l in index.languages_of(m) {
                    if l != lang1 && l != lang2 {
                        v.push((m, Some(l)));
                    }
                }
                if v.len() == before {
                    v.push((m, None));
                }
            }
            v
        } else {
            Vec::new()
        };
        Ok(PairPlan {
            mode,
            lang1,
            lang2,
            shared,
            constant_meaning,
        })
    }

    fn per_direction(&self) -> u128 {
        let m = self.shared.len() as u128;
        match self.mode {
            TripletMode::Ld | TripletMode::Md => m * (m - 1),
            TripletMode::BaselineLd => m * (m - 1) * (m - 2),
            TripletMode::BaselineMd => self.constant_meaning.len() as u128,
        }
    }

    fn languages(&self, x_is_lang1: bool) -> (&'a str, &'a str) {
        if x_is_lang1 {
            (self.lang1, self.lang2)
        } else {
            (self.lang2, self.lang1)
        }
    }

    /// `m` holds shared-meaning positions (M1, M2, M3); only as many as the
    /// mode needs are read. BASELINE_MD reads `m[0]` as a combination index.
    fn build(&self, x_is_lang1: bool, m: [usize; 3]) -> Triplet<'a> {
        let (p, q) = self.languages(x_is_lang1);
        let s = |i: usize| self.shared[i];
        let (x, a, b) = match self.mode {
            TripletMode::Ld => (
                SentenceRef::new(p, s(m[0])),
                SentenceRef::new(p, s(m[1])),
                SentenceRef::new(q, s(m[1])),
            ),
            TripletMode::Md => (
                SentenceRef::new(p, s(m[0])),
                SentenceRef::new(q, s(m[0])),
                SentenceRef::new(q, s(m[1])),
            ),
            TripletMode::BaselineLd => (
                SentenceRef::new(p, s(m[0])),
                SentenceRef::new(p, s(m[1])),
                SentenceRef::new(p, s(m[2])),
            ),
            TripletMode::BaselineMd => {
                let (mid, third) = self.constant_meaning[m[0]];
                (
                    SentenceRef::new(p, mid),
                    SentenceRef::new(q, mid),
                    SentenceRef::new(third.unwrap_or(q), mid),
                )
            }
        };
        Triplet {
            mode: self.mode,
            x,
            a,
            b,
            x_is_lang1,
        }
    }
}

/// Seeded stream of exactly `n` triplets for one (mode, pair).
#[derive(Debug)]
pub struct TripletSampler<'a> {
    plan: PairPlan<'a>,
    rng: StreamRng,
    n: usize,
    emitted: usize,
}

pub fn sample_triplets<'a>(
    index: &'a AlignmentIndex,
    mode: TripletMode,
    lang1: &str,
    lang2: &str,
    n: usize,
    seed: u64,
) -> Result<TripletSampler<'a>> {
    if n == 0 {
        return Err(AbxError::InvalidRequest("n must be at least 1".into()));
    }
    Ok(TripletSampler {
        plan: PairPlan::new(index, mode, lang1, lang2)?,
        rng: StreamRng::new(seed),
        n,
        emitted: 0,
    })
}

impl<'a> TripletSampler<'a> {
    pub fn shared_meanings(&self) -> &[u64] {
        &self.plan.shared
    }

    fn draw(&mut self) -> [usize; 3] {
        let m = self.plan.shared.len();
        let rng = &mut self.rng;
        match self.plan.mode {
            TripletMode::Ld | TripletMode::Md => {
                let i = rng.below_usize(m);
                let mut j = rng.below_usize(m - 1);
                if j >= i {
                    j += 1;
                }
                [i, j, 0]
            }
            TripletMode::BaselineLd => {
                let i = rng.below_usize(m);
                let mut j = rng.below_usize(m - 1);
                if j >= i {
                    j += 1;
                }
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                let mut k = rng.below_usize(m - 2);
                if k >= lo {
                    k += 1;
                }
                if k >= hi {
                    k += 1;
                }
                [i, j, k]
            }
            TripletMode::BaselineMd => [rng.below_usize(self.plan.constant_meaning.len()), 0, 0],
        }
    }
}

impl<'a> Iterator for TripletSampler<'a> {
    type Item = Triplet<'a>;

    fn next(&mut self) -> Option<Triplet<'a>> {
        if self.emitted == self.n {
            return None;
        }
        let x_is_lang1 = self.emitted.is_multiple_of(2);
        self.emitted += 1;
        let m = self.draw();
        Some(self.plan.build(x_is_lang1, m))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.n - self.emitted;
        (left, Some(left))
    }
}

impl ExactSizeIterator for TripletSampler<'_> {}

/// Number of distinct valid triplets for (mode, pair).
pub fn pool_size(index: &AlignmentIndex, mode: TripletMode, lang1: &str, lang2: &str) -> Result<u128> {
    Ok(2 * PairPlan::new(index, mode, lang1, lang2)?.per_direction())
}

/// Every valid triplet once, ordered by direction (lang1 as X first), then
/// M1, M2, M3 by position in the shared-meaning list.
pub fn enumerate_all_triplets<'a>(
    index: &'a AlignmentIndex,
    mode: TripletMode,
    lang1: &str,
    lang2: &str,
    cap: u128,
) -> Result<TripletEnumerator<'a>> {
    let plan = PairPlan::new(index, mode, lang1, lang2)?;
    let pool = 2 * plan.per_direction();
    if pool > cap {
        return Err(AbxError::PoolTooLarge { pool, cap });
    }
    Ok(TripletEnumerator {
        plan,
        direction: 0,
        cursor: [0, 0, 0],
        pool,
        emitted: 0,
    })
}

#[derive(Debug)]
pub struct TripletEnumerator<'a> {
    plan: PairPlan<'a>,
    direction: usize,
    cursor: [usize; 3],
    pool: u128,
    emitted: u128,
}

impl TripletEnumerator<'_> {
    pub fn pool_size(&self) -> u128 {
        self.pool
    }

    fn valid(&self, c: [usize; 3]) -> bool {
        match self.plan.mode {
            TripletMode::Ld | TripletMode::Md => c[0] != c[1],
            TripletMode::BaselineLd => c[0] != c[1] && c[0] != c[2] && c[1] != c[2],
            TripletMode::BaselineMd => true,
        }
    }

    /// Advances the odometer; returns false once both directions are done.
    fn advance(&mut self) -> bool {
        let m = self.plan.shared.len();
        let (digits, radix) = match self.plan.mode {
            TripletMode::Ld | TripletMode::Md => (2, m),
            TripletMode::BaselineLd => (3, m),
            TripletMode::BaselineMd => (1, self.plan.constant_meaning.len()),
        };
        for d in (0..digits).rev() {
            self.cursor[d] += 1;
            if self.cursor[d] < radix {
                return true;
            }
            self.cursor[d] = 0;
        }
        self.direction += 1;
        self.direction < 2
    }
}

impl<'a> Iterator for TripletEnumerator<'a> {
    type Item = Triplet<'a>;

    fn next(&mut self) -> Option<Triplet<'a>> {
        while self.direction < 2 {
            let c = self.cursor;
            let dir = self.direction;
            let ok = self.valid(c);
            self.advance();
            if ok {
                self.emitted += 1;
                return Some(self.plan.build(dir == 0, c));
            }
        }
        None
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.pool - self.emitted) as usize;
        (left, Some(left))
    }
}
