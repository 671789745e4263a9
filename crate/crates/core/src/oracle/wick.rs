use crate::error::{Error, Result};

/// A perfect matching of labels `0..2n`; each pair is `(l, m)` with `l < m`.
pub type Pairing = Vec<(usize, usize)>;

/// `(2n − 1)!!`, the number of perfect matchings of `2n` labels.
pub fn double_factorial_odd(n: usize) -> usize {
    (1..=n).map(|k| 2 * k - 1).product()
}

/// Every perfect matching of the labels `0..count`, each pair ordered and the
/// pairs listed by their first label.
pub fn wick_pairings(count: usize) -> Result<Vec<Pairing>> {
    if count % 2 != 0 {
        return Err(Error::InvalidInput(format!("cannot pair an odd number ({count}) of operators")));
    }
    let labels: Vec<usize> = (0..count).collect();
    let mut out = Vec::new();
    extend(&labels, &mut Vec::new(), &mut out);
    Ok(out)
}

fn extend(rest: &[usize], current: &mut Pairing, out: &mut Vec<Pairing>) {
    let Some((&first, tail)) = rest.split_first() else {
        out.push(current.clone());
        return;
    };
    for i in 0..tail.len() {
        current.push((first, tail[i]));
        let remaining: Vec<usize> = tail.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &l)| l).collect();
        extend(&remaining, current, out);
        current.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(wick_pairings(0).unwrap(), vec![Vec::<(usize, usize)>::new()]);
        for n in 1..=4 {
            assert_eq!(wick_pairings(2 * n).unwrap().len(), double_factorial_odd(n));
        }
        assert_eq!(wick_pairings(6).unwrap().len(), 15);
        assert!(wick_pairings(3).is_err());
    }

    #[test]
    fn four_labels() {
        let p = wick_pairings(4).unwrap();
        assert_eq!(p, vec![vec![(0, 1), (2, 3)], vec![(0, 2), (1, 3)], vec![(0, 3), (1, 2)]]);
    }

    #[test]
    fn matchings_are_distinct_and_complete() {
        let all = wick_pairings(6).unwrap();
        for p in &all {
            let mut seen: Vec<usize> = p.iter().flat_map(|&(a, b)| [a, b]).collect();
            assert!(p.iter().all(|&(a, b)| a < b));
            seen.sort();
            assert_eq!(seen, (0..6).collect::<Vec<_>>());
        }
        for i in 0..all.len() {
            for j in (i + 1)..all.len() {
                assert_ne!(all[i], all[j]);
            }
        }
    }
}
