//! Generators and brute-force oracles shared by the integration tests.
//! Nothing here calls into the code paths it is used to check.

#![allow(dead_code)]

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stereogen::hac::Linkage;
use stereogen::ingest::{ItemCatalog, Rating};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

/// Symmetric matrix with zero diagonal and off-diagonal entries in [0, 1).
pub fn random_dissimilarity(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = rng.random();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// (left, right, height, size) per merge.
pub type RefMerge = (usize, usize, f64, usize);

/// From-scratch agglomeration: at every step the linkage between every pair
/// of current clusters is recomputed from the member sets. Ward uses the
/// closed form of the Lance–Williams recursion on raw dissimilarities:
///
///   L(A,B) = 2 nA nB / (nA + nB) * ( S_AB / (nA nB) - S_AA / (2 nA^2) - S_BB / (2 nB^2) )
///
/// where S_XY sums d over ordered pairs (x in X, y in Y).
pub fn reference_agglomerate(d: &Array2<f64>, linkage: Linkage) -> Vec<RefMerge> {
    let n = d.nrows();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::new();
    let sum = |a: &[usize], b: &[usize]| -> f64 {
        a.iter()
            .flat_map(|&i| b.iter().map(move |&j| d[[i, j]]))
            .sum()
    };
    let link = |a: &[usize], b: &[usize]| -> f64 {
        match linkage {
            Linkage::Single => a
                .iter()
                .flat_map(|&i| b.iter().map(move |&j| d[[i, j]]))
                .fold(f64::INFINITY, f64::min),
            Linkage::Complete => a
                .iter()
                .flat_map(|&i| b.iter().map(move |&j| d[[i, j]]))
                .fold(f64::NEG_INFINITY, f64::max),
            Linkage::Ward => {
                let (na, nb) = (a.len() as f64, b.len() as f64);
                let e = sum(a, b) / (na * nb)
                    - sum(a, a) / (2.0 * na * na)
                    - sum(b, b) / (2.0 * nb * nb);
                2.0 * na * nb / (na + nb) * e
            }
        }
    };
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for x in 0..clusters.len() {
            for y in (x + 1)..clusters.len() {
                let h = link(&clusters[x].1, &clusters[y].1);
                let (lo, hi) = (
                    clusters[x].0.min(clusters[y].0),
                    clusters[x].0.max(clusters[y].0),
                );
                let better = match best {
                    None => true,
                    Some((bh, blo, bhi, _, _)) => h < bh || (h == bh && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((h, lo, hi, x, y));
                }
            }
        }
        let (h, lo, hi, x, y) = best.unwrap();
        let mut members = clusters[x].1.clone();
        members.extend(&clusters[y].1);
        clusters.remove(y);
        clusters.remove(x);
        let size = members.len();
        clusters.push((n + merges.len(), members));
        merges.push((lo, hi, h, size));
    }
    merges
}

/// Items × labels data with planted label blocks: each block switches on
/// independently with probability `block_rate`; an active block turns each
/// of its labels on with probability `within`, otherwise labels fire at the
/// `background` rate. Returns rows and the planted partition (label ids).
pub fn planted_blocks(
    block_sizes: &[usize],
    items: usize,
    block_rate: f64,
    within: f64,
    background: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<u8>>, Vec<Vec<usize>>) {
    let mut partition = Vec::new();
    let mut next = 0;
    for &s in block_sizes {
        partition.push((next..next + s).collect::<Vec<_>>());
        next += s;
    }
    let rows = (0..items)
        .map(|_| {
            let mut row = vec![0u8; next];
            for block in &partition {
                let active = rng.random::<f64>() < block_rate;
                let p = if active { within } else { background };
                for &l in block {
                    row[l] = u8::from(rng.random::<f64>() < p);
                }
            }
            row
        })
        .collect();
    (rows, partition)
}

/// Labels firing independently with probability `rate`.
pub fn independent_labels(
    labels: usize,
    items: usize,
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<u8>> {
    (0..items)
        .map(|_| {
            (0..labels)
                .map(|_| u8::from(rng.random::<f64>() < rate))
                .collect()
        })
        .collect()
}

pub fn as_partition(groups: &[Vec<usize>]) -> BTreeSet<BTreeSet<usize>> {
    groups.iter().map(|g| g.iter().copied().collect()).collect()
}

/// Optimal 2-cluster k-modes cost by enumerating every split of the rows
/// into two non-empty parts. For boolean attributes the best mode of a part
/// costs min(#true, #false) per attribute.
pub fn best_two_partition_cost(rows: &[Vec<bool>]) -> usize {
    let n = rows.len();
    let width = rows[0].len();
    let part_cost = |mask: u32, side: bool| -> usize {
        (0..width)
            .map(|j| {
                let (mut t, mut f) = (0, 0);
                for (i, r) in rows.iter().enumerate() {
                    if ((mask >> i) & 1 == 1) == side {
                        if r[j] {
                            t += 1
                        } else {
                            f += 1
                        }
                    }
                }
                t.min(f)
            })
            .sum()
    };
    // fix row 0 on side 0 to skip mirrored splits
    (1u32..(1 << (n - 1)))
        .map(|m| m << 1)
        .map(|mask| part_cost(mask, false) + part_cost(mask, true))
        .min()
        .unwrap()
}

/// Theme of each fixture genre/keyword label; drives the synthetic ratings.
pub fn fixture_theme(label: &str) -> Option<usize> {
    const THEMES: [&[&str]; 8] = [
        &["Music", "Musical", "concert", "singer", "dance"],
        &[
            "Fantasy",
            "Animation",
            "Family",
            "Children's",
            "magic",
            "talking animal",
            "dragon",
        ],
        &[
            "Action",
            "Adventure",
            "Western",
            "explosion",
            "violence",
            "chase",
            "cowboy",
        ],
        &["War", "History", "world war ii", "soldier", "widow"],
        &[
            "TV Movie",
            "Documentary",
            "Foreign",
            "interview",
            "biography",
        ],
        &[
            "Film-Noir",
            "Crime",
            "Thriller",
            "Mystery",
            "murder",
            "police",
            "detective",
            "robbery",
        ],
        &[
            "Romance",
            "Comedy",
            "Drama",
            "Horror",
            "love",
            "wedding",
            "friendship",
            "paris",
        ],
        &["Science Fiction", "Sci-Fi", "alien", "dystopia", "robot"],
    ];
    THEMES.iter().position(|t| t.contains(&label))
}

/// Synthetic ratings over a catalog. A rating is
/// 3.4 + user bias + item quality + theme appeal (shared by all users, plus
/// a per-user taste term) + noise, rounded and clamped to 1..=5.
pub fn synthetic_ratings(
    catalog: &ItemCatalog,
    users: usize,
    per_user: usize,
    seed: u64,
) -> Vec<Rating> {
    let mut rng = rng(seed);
    let appeal: Vec<f64> = (0..8).map(|_| rng.random_range(-0.6..0.6)).collect();
    let quality: Vec<f64> = (0..catalog.len())
        .map(|_| rng.random_range(-0.3..0.3))
        .collect();
    let item_themes: Vec<Vec<usize>> = catalog
        .items()
        .iter()
        .map(|it| {
            let mut t: Vec<usize> = it
                .labels
                .iter()
                .flatten()
                .filter_map(|l| fixture_theme(l))
                .collect();
            t.sort_unstable();
            t.dedup();
            t
        })
        .collect();
    let per_user = per_user.min(catalog.len());
    let mut out = Vec::with_capacity(users * per_user);
    for u in 0..users {
        let bias: f64 = rng.random_range(-0.7..0.7);
        let taste: Vec<f64> = (0..8).map(|_| rng.random_range(-0.5..0.5)).collect();
        let mut order: Vec<usize> = (0..catalog.len()).collect();
        for i in 0..per_user {
            let j = rng.random_range(i..order.len());
            order.swap(i, j);
        }
        for &i in &order[..per_user] {
            let theme: f64 = item_themes[i].iter().map(|&t| appeal[t] + taste[t]).sum();
            let noise: f64 = rng.random_range(-1.0..1.0) + rng.random_range(-1.0..1.0);
            let r = (3.4 + bias + quality[i] + theme + 0.6 * noise)
                .round()
                .clamp(1.0, 5.0);
            out.push(Rating {
                user: format!("u{u:05}"),
                item: catalog.items()[i].id.clone(),
                rating: r as u8,
            });
        }
    }
    out
}
