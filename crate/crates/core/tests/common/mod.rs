//! Brute-force references and case generators shared by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use reamot::metrics::Sequence;
use reamot::BoundingBox;

/// Boxes per frame, each frame sorted by id.
pub type Frames = BTreeMap<usize, Vec<(u64, BoundingBox)>>;

pub fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
    BoundingBox::new(x1, y1, x2, y2).unwrap()
}

/// IoU written out from coordinates.
pub fn iou_ref(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.x2().min(b.x2()) - a.x1().max(b.x1())).max(0.0);
    let ih = (a.y2().min(b.y2()) - a.y1().max(b.y1())).max(0.0);
    let inter = iw * ih;
    let union = (a.x2() - a.x1()) * (a.y2() - a.y1()) + (b.x2() - b.x1()) * (b.y2() - b.y1()) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

pub fn to_sequence(frames: &Frames) -> Sequence {
    let mut s = Sequence::new();
    for (&f, boxes) in frames {
        for &(id, b) in boxes {
            s.insert(f, id, b).unwrap();
        }
    }
    s
}

/// Every permutation of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Minimum over all padded permutations; the first minimum in lexicographic
/// order wins sums within `1e-9`. Returns the real (row, col) pairs.
pub fn brute_assignment(cost: &[Vec<f64>], rows: usize, cols: usize, pad: f64) -> (f64, Vec<(usize, usize)>) {
    let n = rows.max(cols);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in permutations(n) {
        let mut total = 0.0;
        for (r, &c) in perm.iter().enumerate() {
            total += if r < rows && c < cols { cost[r][c] } else { pad };
        }
        if best.as_ref().is_none_or(|(b, _)| total < b - 1e-9) {
            best = Some((total, perm));
        }
    }
    let Some((total, perm)) = best else {
        return (0.0, Vec::new());
    };
    let pairs = perm
        .iter()
        .enumerate()
        .filter(|&(r, &c)| r < rows && c < cols)
        .map(|(r, &c)| (r, c))
        .collect();
    (total, pairs)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClearRef {
    pub pairs: Vec<(usize, Vec<(u64, u64)>)>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
    pub gt: usize,
}

/// CLEAR events by enumeration: keep last frame's pairs that still overlap
/// enough, then the best padded permutation over the rest, where pairs under
/// the threshold cost the same as padding.
pub fn clear_reference(gt: &Frames, pred: &Frames, tp_iou: f64) -> ClearRef {
    let mut out = ClearRef::default();
    let frames: BTreeSet<usize> = gt.keys().chain(pred.keys()).copied().collect();
    let mut prev: Option<(usize, Vec<(u64, u64)>)> = None;
    let mut last: HashMap<u64, u64> = HashMap::new();
    let none = Vec::new();
    for f in frames {
        let g = gt.get(&f).unwrap_or(&none);
        let p = pred.get(&f).unwrap_or(&none);
        let find = |v: &Vec<(u64, BoundingBox)>, id: u64| v.iter().find(|e| e.0 == id).map(|e| e.1);
        let mut pairs = Vec::new();
        if let Some((pf, pp)) = &prev {
            if pf + 1 == f {
                for &(gi, pi) in pp {
                    if let (Some(a), Some(b)) = (find(g, gi), find(p, pi)) {
                        if iou_ref(&a, &b) >= tp_iou {
                            pairs.push((gi, pi));
                        }
                    }
                }
            }
        }
        let rg: Vec<_> = g.iter().filter(|e| !pairs.iter().any(|q| q.0 == e.0)).collect();
        let rp: Vec<_> = p.iter().filter(|e| !pairs.iter().any(|q| q.1 == e.0)).collect();
        let cost: Vec<Vec<f64>> = rg
            .iter()
            .map(|a| {
                rp.iter()
                    .map(|b| {
                        let v = iou_ref(&a.1, &b.1);
                        if v >= tp_iou {
                            1.0 - v
                        } else {
                            1.0
                        }
                    })
                    .collect()
            })
            .collect();
        if !rg.is_empty() && !rp.is_empty() {
            for (r, c) in brute_assignment(&cost, rg.len(), rp.len(), 1.0).1 {
                if iou_ref(&rg[r].1, &rp[c].1) >= tp_iou {
                    pairs.push((rg[r].0, rp[c].0));
                }
            }
        }
        pairs.sort();
        for &(gi, pi) in &pairs {
            if last.get(&gi).is_some_and(|&q| q != pi) {
                out.idsw += 1;
            }
            last.insert(gi, pi);
        }
        out.tp += pairs.len();
        out.fp += p.len() - pairs.len();
        out.fn_ += g.len() - pairs.len();
        out.gt += g.len();
        out.pairs.push((f, pairs.clone()));
        prev = Some((f, pairs));
    }
    out
}

/// `(idtp, idfp, idfn)` by trying every partial one-to-one map from gt ids to
/// prediction ids.
pub fn idf1_reference(gt: &Frames, pred: &Frames, tp_iou: f64) -> (usize, usize, usize) {
    let gids: Vec<u64> = gt.values().flatten().map(|e| e.0).collect::<BTreeSet<_>>().into_iter().collect();
    let pids: Vec<u64> = pred.values().flatten().map(|e| e.0).collect::<BTreeSet<_>>().into_iter().collect();
    let coloc = |g: u64, p: u64| -> usize {
        gt.iter()
            .filter_map(|(f, gs)| {
                let a = gs.iter().find(|e| e.0 == g)?.1;
                let b = pred.get(f)?.iter().find(|e| e.0 == p)?.1;
                (iou_ref(&a, &b) >= tp_iou).then_some(1)
            })
            .sum()
    };
    fn best(i: usize, gids: &[u64], pids: &[u64], used: &mut Vec<bool>, coloc: &dyn Fn(u64, u64) -> usize) -> usize {
        if i == gids.len() {
            return 0;
        }
        let mut top = best(i + 1, gids, pids, used, coloc);
        for j in 0..pids.len() {
            if !used[j] {
                used[j] = true;
                top = top.max(coloc(gids[i], pids[j]) + best(i + 1, gids, pids, used, coloc));
                used[j] = false;
            }
        }
        top
    }
    let idtp = best(0, &gids, &pids, &mut vec![false; pids.len()], &coloc);
    let n_gt: usize = gt.values().map(Vec::len).sum();
    let n_pred: usize = pred.values().map(Vec::len).sum();
    (idtp, n_pred - idtp, n_gt - idtp)
}

fn grid_box(rng: &mut ChaCha8Rng) -> BoundingBox {
    let x = rng.random_range(0..8) as f64;
    let y = rng.random_range(0..8) as f64;
    let w = rng.random_range(3..7) as f64;
    let h = rng.random_range(3..7) as f64;
    bb(x, y, x + w, y + h)
}

/// A small instruction: up to 5 frames, up to 3 gt and 3 prediction ids on an
/// integer grid, with most predictions placed near a gt box so that exact
/// ties and threshold crossings are common.
pub fn small_case(rng: &mut ChaCha8Rng) -> (Frames, Frames) {
    let n_frames = rng.random_range(1..=5);
    let id_count = |rng: &mut ChaCha8Rng| if rng.random_bool(0.1) { 0 } else { rng.random_range(1..=3u64) };
    let n_gt = id_count(rng);
    let n_pred = id_count(rng);
    let mut gt = Frames::new();
    let mut pred = Frames::new();
    for f in 0..n_frames {
        let mut g = Vec::new();
        for id in 1..=n_gt {
            if rng.random_bool(0.8) {
                g.push((id, grid_box(rng)));
            }
        }
        let mut p = Vec::new();
        for id in 11..11 + n_pred {
            if !rng.random_bool(0.8) {
                continue;
            }
            let b = if !g.is_empty() && rng.random_bool(0.7) {
                let base = g[rng.random_range(0..g.len())].1;
                let d = |rng: &mut ChaCha8Rng| [-1.0, 0.0, 0.0, 1.0][rng.random_range(0..4)];
                let (x1, y1) = (base.x1() + d(rng), base.y1() + d(rng));
                let (x2, y2) = ((base.x2() + d(rng)).max(x1 + 1.0), (base.y2() + d(rng)).max(y1 + 1.0));
                bb(x1, y1, x2, y2)
            } else {
                grid_box(rng)
            };
            p.push((id, b));
        }
        if !g.is_empty() {
            gt.insert(f, g);
        }
        if !p.is_empty() {
            pred.insert(f, p);
        }
    }
    (gt, pred)
}

/// Like [`small_case`] with continuous coordinates, so exact IoU ties have
/// probability zero.
pub fn continuous_case(rng: &mut ChaCha8Rng, n_frames: usize, n_ids: u64) -> (Frames, Frames) {
    let mut gt = Frames::new();
    let mut pred = Frames::new();
    for f in 0..n_frames {
        let mut g = Vec::new();
        let mut p = Vec::new();
        for id in 1..=n_ids {
            let x = rng.random_range(0.0..40.0);
            let y = rng.random_range(0.0..40.0);
            let b = bb(x, y, x + rng.random_range(4.0..12.0), y + rng.random_range(4.0..12.0));
            if rng.random_bool(0.85) {
                g.push((id, b));
            }
            if rng.random_bool(0.85) {
                let j = |rng: &mut ChaCha8Rng| rng.random_range(-2.0..2.0);
                let (x1, y1) = (b.x1() + j(rng), b.y1() + j(rng));
                p.push((100 + (id * 7 + f as u64) % 5, bb(x1, y1, x1 + b.width() + j(rng).abs(), y1 + b.height())));
            }
        }
        p.sort_by_key(|e| e.0);
        p.dedup_by_key(|e| e.0);
        if !g.is_empty() {
            gt.insert(f, g);
        }
        if !p.is_empty() {
            pred.insert(f, p);
        }
    }
    (gt, pred)
}
