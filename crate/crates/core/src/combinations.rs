//! Enumeration of `t`-subsets of `{0, .., n-1}`.
//!
//! Two orders are provided. Lexicographic order supports ranking and
//! unranking (combinadic), so a scan can be split into rank ranges and the
//! first hit in a range is the lexicographically smallest one. The
//! revolving-door order (Knuth, Algorithm 7.2.1.3R) changes exactly one
//! element in and one element out per step, which keeps incremental sums
//! at O(1) updates per vector.

/// `C(n, k)` as `u128`, or `None` on overflow.
pub fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) after the multiplication
        let num = (n - i) as u128;
        let den = (i + 1) as u128;
        let g = gcd(acc, den);
        let (a, d) = (acc / g, den / g);
        acc = a.checked_mul(num / d)?;
    }
    Some(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Lexicographic rank of a sorted combination.
pub fn rank_lex(n: usize, combo: &[usize]) -> u128 {
    let t = combo.len();
    let mut rank = 0u128;
    let mut prev = 0usize;
    for (pos, &c) in combo.iter().enumerate() {
        let remaining = (t - pos - 1) as u64;
        for skipped in prev..c {
            rank += binomial_u128((n - skipped - 1) as u64, remaining).unwrap_or(u128::MAX);
        }
        prev = c + 1;
    }
    rank
}

/// The combination with the given lexicographic rank.
pub fn unrank_lex(n: usize, t: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(t);
    let mut next = 0usize;
    for pos in 0..t {
        let remaining = (t - pos - 1) as u64;
        loop {
            let block = binomial_u128((n - next - 1) as u64, remaining).unwrap_or(u128::MAX);
            if rank < block {
                break;
            }
            rank -= block;
            next += 1;
        }
        out.push(next);
        next += 1;
    }
    out
}

/// Advances `combo` to its lexicographic successor in place. Returns the
/// first position that changed, or `None` when `combo` was the last one.
#[inline]
pub fn next_lex(n: usize, combo: &mut [usize]) -> Option<usize> {
    let t = combo.len();
    let mut i = t;
    while i > 0 {
        i -= 1;
        if combo[i] < n - t + i {
            combo[i] += 1;
            for j in i + 1..t {
                combo[j] = combo[j - 1] + 1;
            }
            return Some(i);
        }
    }
    None
}

/// Iterator over all `t`-subsets in lexicographic order.
pub struct LexCombinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl LexCombinations {
    pub fn new(n: usize, t: usize) -> Self {
        Self {
            n,
            current: (t <= n).then(|| (0..t).collect()),
        }
    }
}

impl Iterator for LexCombinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.current.as_mut()?;
        let out = cur.clone();
        if next_lex(self.n, cur).is_none() {
            self.current = None;
        }
        Some(out)
    }
}

/// One element leaves the combination and another enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Swap {
    pub out: usize,
    pub into: usize,
}

/// Revolving-door generator. `c[1..=t]` holds the combination in decreasing
/// order, with the sentinel `c[t+1] = n`.
pub struct RevolvingDoor {
    n: usize,
    t: usize,
    c: Vec<usize>,
    started: bool,
    done: bool,
}

impl RevolvingDoor {
    pub fn new(n: usize, t: usize) -> Self {
        let mut c = vec![0; t + 2];
        for j in 1..=t {
            c[j] = j - 1;
        }
        c[t + 1] = n;
        Self {
            n,
            t,
            c,
            started: false,
            done: t > n,
        }
    }

    /// Current combination in increasing order.
    pub fn current(&self) -> Vec<usize> {
        (1..=self.t).map(|j| self.c[j]).collect()
    }

    /// Moves to the next combination. Returns `None` at the first call
    /// (initial combination), `Some(None)` when exhausted.
    fn step(&mut self) -> Option<Swap> {
        let (n, t) = (self.n, self.t);
        let c = &mut self.c;
        if t == 0 || t == n {
            return None;
        }
        if t == 1 {
            if c[1] + 1 < n {
                c[1] += 1;
                return Some(Swap {
                    out: c[1] - 1,
                    into: c[1],
                });
            }
            return None;
        }
        // R3
        let mut j;
        let mut try_decrease;
        if t % 2 == 1 {
            if c[1] + 1 < c[2] {
                c[1] += 1;
                return Some(Swap {
                    out: c[1] - 1,
                    into: c[1],
                });
            }
            j = 2;
            try_decrease = true;
        } else {
            if c[1] > 0 {
                c[1] -= 1;
                return Some(Swap {
                    out: c[1] + 1,
                    into: c[1],
                });
            }
            j = 2;
            try_decrease = false;
        }
        loop {
            if try_decrease {
                // R4: here c[j] == c[j-1] + 1
                if c[j] >= j {
                    let out = c[j];
                    c[j] = c[j - 1];
                    c[j - 1] = j - 2;
                    return Some(Swap { out, into: j - 2 });
                }
                j += 1;
                try_decrease = false;
            } else {
                // R5: here c[j-1] == j - 2
                if c[j] + 1 < c[j + 1] {
                    let out = c[j - 1];
                    c[j - 1] = c[j];
                    c[j] += 1;
                    return Some(Swap { out, into: c[j] });
                }
                j += 1;
                if j > t {
                    return None;
                }
                try_decrease = true;
            }
        }
    }

    /// Visits every combination. The callback receives the combination in
    /// decreasing-index storage order and the swap that produced it (`None`
    /// for the first one).
    pub fn for_each(mut self, mut visit: impl FnMut(&[usize], Option<Swap>)) {
        if self.done {
            return;
        }
        visit(&self.c[1..=self.t], None);
        self.started = true;
        while let Some(swap) = self.step() {
            visit(&self.c[1..=self.t], Some(swap));
        }
        self.done = true;
    }
}
