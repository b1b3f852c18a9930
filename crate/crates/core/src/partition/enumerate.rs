use super::{AlleleSpectrum, Partition};
use crate::{invalid, Result};

/// Largest `n` for which set partitions are enumerated (Bell(10) = 115975).
pub const MAX_ENUMERATION_N: usize = 10;

/// All set partitions of `[n]`, generated from restricted growth strings.
pub fn set_partitions(n: usize) -> Result<Vec<Partition>> {
    if n > MAX_ENUMERATION_N {
        return Err(invalid(format!(
            "enumeration is capped at n = {MAX_ENUMERATION_N}, got {n}"
        )));
    }
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    fn rec(i: usize, max: usize, rgs: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if i == rgs.len() {
            out.push(Partition::from_labels(rgs));
            return;
        }
        for v in 0..=max + 1 {
            rgs[i] = v;
            rec(i + 1, max.max(v), rgs, out);
        }
    }
    if n == 0 {
        out.push(Partition::from_labels::<usize>(&[]));
    } else {
        // the first element always opens block 0
        rec(1, 0, &mut rgs, &mut out);
    }
    Ok(out)
}

/// All allelic spectra of `n` (integer partitions of `n`).
pub fn integer_partitions(n: usize) -> Vec<AlleleSpectrum> {
    let mut out = Vec::new();
    let mut a = vec![0u64; n];
    fn rec(rem: usize, max_part: usize, a: &mut Vec<u64>, out: &mut Vec<AlleleSpectrum>, n: usize) {
        if rem == 0 {
            out.push(AlleleSpectrum { n, a: a.clone() });
            return;
        }
        for j in (1..=max_part.min(rem)).rev() {
            a[j - 1] += 1;
            rec(rem - j, j, a, out, n);
            a[j - 1] -= 1;
        }
    }
    rec(n, n, &mut a, &mut out, n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52, 203, 877, 4140];
        for (n, b) in bell.iter().enumerate() {
            let ps = set_partitions(n).unwrap();
            assert_eq!(ps.len(), *b);
            let mut sorted = ps.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), *b);
        }
        assert!(set_partitions(11).is_err());
    }

    #[test]
    fn partition_numbers() {
        let p = [1, 1, 2, 3, 5, 7, 11, 15, 22];
        for (n, c) in p.iter().enumerate() {
            assert_eq!(integer_partitions(n).len(), *c);
        }
    }
}
