//! Bijections between structured index tuples and dense integer ranks.
//!
//! - m-subsets of `{0..n-1}` (sorted ascending) use colexicographic rank,
//!   `rank = Σ_j C(c_j, j+1)`.
//! - injections `φ: {0..v-1} → {0..n-1}` use the mixed-radix Lehmer rank with
//!   radices `n, n-1, …, n-v+1`.

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = match acc.checked_mul((n - t) as u128) {
            Some(v) => v / (t + 1) as u128,
            None => return u128::MAX,
        };
    }
    acc
}

/// Falling factorial `n (n-1) ⋯ (n-k+1)`, saturating.
pub fn falling(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc.saturating_mul((n - t) as u128);
    }
    acc
}

pub fn subset_rank(subset: &[usize]) -> u64 {
    subset.iter().enumerate().map(|(j, &c)| binom(c as u64, j as u64 + 1) as u64).sum()
}

pub fn subset_unrank(mut rank: u64, k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for j in (0..k).rev() {
        // largest c with C(c, j+1) <= rank
        let mut c = j;
        while binom(c as u64 + 1, j as u64 + 1) as u64 <= rank {
            c += 1;
        }
        out[j] = c;
        rank -= binom(c as u64, j as u64 + 1) as u64;
    }
    out
}

/// Calls `f` on every `k`-subset of `{0..n-1}` in colex order.
pub fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    if k == 0 {
        f(&[]);
        return;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        f(&c);
        // colex successor
        let mut j = 0;
        while j + 1 < k && c[j] + 1 == c[j + 1] {
            j += 1;
        }
        if j + 1 == k && c[j] + 1 == n {
            return;
        }
        c[j] += 1;
        for (t, slot) in c.iter_mut().enumerate().take(j) {
            *slot = t;
        }
    }
}

/// Edge variable index of the unordered pair `{i, j}`, `i != j`.
pub fn pair_rank(i: usize, j: usize) -> usize {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    hi * (hi - 1) / 2 + lo
}

pub fn injection_rank(phi: &[usize], n: usize) -> u64 {
    let mut used = vec![false; n];
    let mut rank = 0u64;
    for (t, &x) in phi.iter().enumerate() {
        let digit = used[..x].iter().filter(|u| !**u).count() as u64;
        rank = rank * (n - t) as u64 + digit;
        used[x] = true;
    }
    rank
}

pub fn injection_unrank(mut rank: u64, v: usize, n: usize) -> Vec<usize> {
    let mut digits = vec![0u64; v];
    for t in (0..v).rev() {
        let radix = (n - t) as u64;
        digits[t] = rank % radix;
        rank /= radix;
    }
    let mut free: Vec<usize> = (0..n).collect();
    digits.iter().map(|&d| free.remove(d as usize)).collect()
}

/// Calls `f` on every injection `{0..v-1} → {0..n-1}` in rank order.
pub fn for_each_injection(n: usize, v: usize, mut f: impl FnMut(&[usize])) {
    fn rec(n: usize, v: usize, cur: &mut Vec<usize>, used: &mut [bool], f: &mut dyn FnMut(&[usize])) {
        if cur.len() == v {
            f(cur);
            return;
        }
        for x in 0..n {
            if !used[x] {
                used[x] = true;
                cur.push(x);
                rec(n, v, cur, used, f);
                cur.pop();
                used[x] = false;
            }
        }
    }
    if v > n {
        return;
    }
    rec(n, v, &mut Vec::with_capacity(v), &mut vec![false; n], &mut f);
}
