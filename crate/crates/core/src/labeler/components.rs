use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::BinaryMask;

/// Keeps the largest 8-connected component. Equal sizes resolve to the
/// component whose first pixel comes first in row-major order.
pub fn largest_component(mask: &BinaryMask) -> Result<BinaryMask> {
    let (w, h) = mask.dims();
    let mut label = vec![0u32; w * h];
    let mut best: Option<(u32, usize)> = None;
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.as_slice()[start] || label[start] != 0 {
            continue;
        }
        next += 1;
        label[start] = next;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (u, v) = ((i % w) as i64, (i / w) as i64);
            for dv in -1..=1 {
                for du in -1..=1 {
                    let (nu, nv) = (u + du, v + dv);
                    if mask.get(nu, nv) == Some(&true) {
                        let j = nv as usize * w + nu as usize;
                        if label[j] == 0 {
                            label[j] = next;
                            queue.push_back(j);
                        }
                    }
                }
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((next, size));
        }
    }
    let (keep, _) = best.ok_or(Error::EmptyMask)?;
    BinaryMask::from_vec(w, h, label.into_iter().map(|l| l == keep).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(rows: &[&str]) -> BinaryMask {
        let h = rows.len();
        let w = rows[0].len();
        BinaryMask::from_fn(w, h, |u, v| rows[v].as_bytes()[u] == b'#')
    }

    #[test]
    fn single_blob_is_kept() {
        let m = mask_from(&["....", ".##.", ".#..", "...."]);
        assert_eq!(largest_component(&m).unwrap(), m);
    }

    #[test]
    fn picks_the_larger_blob() {
        // 10-pixel blob on the right, 5-pixel blob on the left
        let m = mask_from(&[
            "#.....#####",
            "#.....#####",
            "#..........",
            "#..........",
            "#..........",
        ]);
        let out = largest_component(&m).unwrap();
        assert_eq!(out.count(), 10);
        assert!(*out.at(6, 0) && !*out.at(0, 0));
    }

    #[test]
    fn equal_sizes_prefer_earlier_first_pixel() {
        let m = mask_from(&["...##", "##...", "....."]);
        let out = largest_component(&m).unwrap();
        assert!(*out.at(3, 0) && *out.at(4, 0));
        assert!(!*out.at(0, 1));
    }

    #[test]
    fn diagonal_pixels_connect() {
        let m = mask_from(&["#..", ".#.", "..#"]);
        assert_eq!(largest_component(&m).unwrap().count(), 3);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let m = BinaryMask::filled(4, 4, false);
        assert!(matches!(largest_component(&m), Err(Error::EmptyMask)));
    }
}
