//! Representative-scenario selection: TF-IDF over explanation texts, cosine
//! distance, average-linkage agglomeration and per-cluster medoids.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;
use thiserror::Error;

/// Number of representatives drawn for the user study.
pub const DEFAULT_CLUSTERS: usize = 38;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("no documents to cluster")]
    EmptyCorpus,
    #[error("k = {k} is outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("duplicate vid {0}")]
    DuplicateVid(String),
    #[error("vid {0} has no vector")]
    MissingVector(String),
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TextVector {
    pub vid: String,
    /// L2-normalized TF-IDF weights keyed by lowercased term.
    pub weights: BTreeMap<String, f64>,
    /// Set when the text had no tokens; the vector is then all zeros.
    pub degenerate: bool,
}

/// Lowercase, split on anything that is not alphanumeric. No stemming and no
/// stop words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Smoothed inverse document frequency: `ln((1 + n_docs) / (1 + df)) + 1`.
pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Raw term count times smoothed idf, L2-normalized per document. Output is
/// ordered by vid.
pub fn vectorize(messages: &BTreeMap<String, String>) -> Result<Vec<TextVector>, ClusterError> {
    if messages.is_empty() {
        return Err(ClusterError::EmptyCorpus);
    }
    let counts: Vec<(&String, BTreeMap<String, usize>)> = messages
        .iter()
        .map(|(vid, text)| {
            let mut tf = BTreeMap::new();
            for t in tokenize(text) {
                *tf.entry(t).or_insert(0) += 1;
            }
            (vid, tf)
        })
        .collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, tf) in &counts {
        for term in tf.keys() {
            *df.entry(term.as_str()).or_insert(0) += 1;
        }
    }
    let n = counts.len();
    Ok(counts
        .iter()
        .map(|(vid, tf)| {
            let mut weights: BTreeMap<String, f64> = tf
                .iter()
                .map(|(term, &c)| (term.clone(), c as f64 * smoothed_idf(n, df[term.as_str()])))
                .collect();
            let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                weights.values_mut().for_each(|w| *w /= norm);
            }
            TextVector { vid: (*vid).clone(), weights, degenerate: tf.is_empty() }
        })
        .collect())
}

/// `1 - cos(a, b)`, clamped to [0, 1]. Any zero vector is at distance 1.
pub fn cosine_distance(a: &TextVector, b: &TextVector) -> f64 {
    cosine_distance_maps(&a.weights, &b.weights)
}

fn cosine_distance_maps(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small.iter().filter_map(|(t, w)| large.get(t).map(|v| w * v)).sum();
    let na = a.values().map(|w| w * w).sum::<f64>().sqrt();
    let nb = b.values().map(|w| w * w).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (na * nb)).clamp(0.0, 1.0)
}

/// Symmetric pairwise distance matrix in row-major order.
pub fn distance_matrix(vectors: &[TextVector]) -> Vec<f64> {
    use rayon::prelude::*;
    let n = vectors.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { cosine_distance(&vectors[i], &vectors[j]) }).collect())
        .collect();
    rows.concat()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    /// Node ids: `0..n` are leaves, `n + i` is the cluster made by merge `i`.
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dendrogram {
    /// Leaf vids in ascending order; leaf id = position.
    pub leaves: Vec<String>,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Flat clusters left after the first `n - k` merges, as leaf-index sets
    /// ordered by their smallest leaf.
    pub fn cut(&self, k: usize) -> Result<Vec<Vec<usize>>, ClusterError> {
        let n = self.leaves.len();
        if k == 0 || k > n {
            return Err(ClusterError::KOutOfRange { k, n });
        }
        let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
        for m in &self.merges[..n - k] {
            let mut joined = members[m.a].take().expect("merged twice");
            joined.extend(members[m.b].take().expect("merged twice"));
            joined.sort_unstable();
            members.push(Some(joined));
        }
        let mut clusters: Vec<Vec<usize>> = members.into_iter().flatten().collect();
        clusters.sort_by_key(|c| c[0]);
        Ok(clusters)
    }
}

/// Builds the full average-linkage dendrogram over `vectors`.
///
/// Linkage between clusters is the unweighted mean of member-pair distances,
/// tracked as running pairwise sums. Equal linkages are broken by the pair of
/// smallest member vids, so the result does not depend on input order.
pub fn build_dendrogram(vectors: &[TextVector]) -> Result<Dendrogram, ClusterError> {
    if vectors.is_empty() {
        return Err(ClusterError::EmptyCorpus);
    }
    let mut sorted: Vec<&TextVector> = vectors.iter().collect();
    sorted.sort_by(|a, b| a.vid.cmp(&b.vid));
    if let Some(w) = sorted.windows(2).find(|w| w[0].vid == w[1].vid) {
        return Err(ClusterError::DuplicateVid(w[0].vid.clone()));
    }
    let owned: Vec<TextVector> = sorted.into_iter().cloned().collect();
    let n = owned.len();
    // sums[i * n + j]: total distance between the clusters whose smallest
    // leaves are i and j.
    let mut sums = distance_matrix(&owned);
    let mut size = vec![1usize; n];
    let mut node = (0..n).collect::<Vec<_>>();
    let mut active: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    while active.len() > 1 {
        let mut best = (f64::INFINITY, 0usize, 0usize);
        for (ai, &i) in active.iter().enumerate() {
            for &j in &active[ai + 1..] {
                let d = sums[i * n + j] / (size[i] * size[j]) as f64;
                if d < best.0 {
                    best = (d, ai, j);
                }
            }
        }
        let (distance, ai, j) = best;
        let i = active[ai];
        for &k in &active {
            if k != i && k != j {
                let s = sums[i * n + k] + sums[j * n + k];
                sums[i * n + k] = s;
                sums[k * n + i] = s;
            }
        }
        size[i] += size[j];
        merges.push(Merge { a: node[i], b: node[j], distance, size: size[i] });
        node[i] = n + merges.len() - 1;
        active.retain(|&x| x != j);
    }
    Ok(Dendrogram { leaves: owned.into_iter().map(|v| v.vid).collect(), merges })
}

/// Clusters into `k` groups. Cluster labels are `0..k`, ordered by each
/// cluster's smallest vid.
pub fn agglomerate(
    vectors: &[TextVector],
    k: usize,
) -> Result<(Dendrogram, BTreeMap<String, usize>), ClusterError> {
    let n = vectors.len();
    if n == 0 {
        return Err(ClusterError::EmptyCorpus);
    }
    if k == 0 || k > n {
        return Err(ClusterError::KOutOfRange { k, n });
    }
    let dendrogram = build_dendrogram(vectors)?;
    let mut assignment = BTreeMap::new();
    for (label, members) in dendrogram.cut(k)?.into_iter().enumerate() {
        for leaf in members {
            assignment.insert(dendrogram.leaves[leaf].clone(), label);
        }
    }
    Ok((dendrogram, assignment))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Medoid {
    pub cluster: usize,
    pub vid: String,
    /// Mean distance from the medoid to the other members (0 for singletons).
    pub medoid_distance: f64,
}

/// Member minimizing mean cosine distance to the rest of its cluster; ties go
/// to the smallest vid.
pub fn medoids(
    assignment: &BTreeMap<String, usize>,
    vectors: &[TextVector],
) -> Result<BTreeMap<usize, Medoid>, ClusterError> {
    let by_vid: BTreeMap<&str, &TextVector> = vectors.iter().map(|v| (v.vid.as_str(), v)).collect();
    let mut clusters: BTreeMap<usize, Vec<&TextVector>> = BTreeMap::new();
    for (vid, &c) in assignment {
        let v = by_vid.get(vid.as_str()).ok_or_else(|| ClusterError::MissingVector(vid.clone()))?;
        clusters.entry(c).or_default().push(v);
    }
    let labels: BTreeSet<usize> = assignment.values().copied().collect();
    if let Some(max) = labels.iter().next_back() {
        if let Some(gap) = (0..=*max).find(|c| !labels.contains(c)) {
            return Err(ClusterError::EmptyCluster(gap));
        }
    }
    let mut out = BTreeMap::new();
    for (c, members) in clusters {
        let m = members.len();
        let mut best: Option<(f64, &str)> = None;
        // `members` is in vid order, so a strict comparison keeps the smallest vid on ties.
        for a in &members {
            let total: f64 = members
                .iter()
                .filter(|b| b.vid != a.vid)
                .map(|b| cosine_distance(a, b))
                .sum();
            let mean = if m > 1 { total / (m - 1) as f64 } else { 0.0 };
            if best.is_none_or(|(d, _)| mean < d) {
                best = Some((mean, &a.vid));
            }
        }
        let (d, vid) = best.expect("cluster has members");
        out.insert(c, Medoid { cluster: c, vid: vid.to_string(), medoid_distance: d });
    }
    Ok(out)
}

/// Writes `cluster,vid,medoid_distance`.
pub fn write_centers_csv<W: Write>(out: W, medoids: &BTreeMap<usize, Medoid>) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cluster", "vid", "medoid_distance"])?;
    for m in medoids.values() {
        w.write_record([m.cluster.to_string(), m.vid.clone(), m.medoid_distance.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tv(vid: &str, pairs: &[(&str, f64)]) -> TextVector {
        TextVector {
            vid: vid.into(),
            weights: pairs.iter().map(|(t, w)| (t.to_string(), *w)).collect(),
            degenerate: pairs.is_empty(),
        }
    }

    fn docs(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn tokenizer_lowercases_and_splits() {
        assert_eq!(tokenize("I'll slow-down, NOW!"), vec!["i", "ll", "slow", "down", "now"]);
        assert!(tokenize("  ...  ").is_empty());
    }

    #[test]
    fn identical_texts_give_identical_weights() {
        let v = vectorize(&docs(&[("a", "Car ahead brakes"), ("b", "car ahead brakes"), ("c", "x")])).unwrap();
        assert_eq!(v[0].weights, v[1].weights);
    }

    #[test]
    fn universal_term_gets_the_floor_idf() {
        let v = vectorize(&docs(&[("a", "the car stops"), ("b", "the light"), ("c", "the the bus")])).unwrap();
        // "the" is in every document: idf bottoms out at ln(1) + 1 = 1, below every other term.
        assert_eq!(smoothed_idf(3, 3), 1.0);
        assert!(smoothed_idf(3, 3) < smoothed_idf(3, 1));
        let raw_the_in_b = 1.0 * smoothed_idf(3, 3);
        let raw_light = 1.0 * smoothed_idf(3, 1);
        assert!(v[1].weights["the"] < v[1].weights["light"]);
        assert!((v[1].weights["the"] / v[1].weights["light"] - raw_the_in_b / raw_light).abs() < 1e-12);
    }

    #[test]
    fn toy_corpus_matches_hand_table() {
        // Hand computation with idf = ln((1+3)/(1+df)) + 1:
        //   df: car=2, stops=1, light=2, red=1
        //   a = "car stops":          car 1*(ln(4/3)+1), stops 1*(ln2+1)
        //   b = "red light light":    red (ln2+1), light 2*(ln(4/3)+1)
        //   c = "car light":          car (ln(4/3)+1), light (ln(4/3)+1)
        let v = vectorize(&docs(&[("a", "car stops"), ("b", "red light light"), ("c", "car light")])).unwrap();
        let i2 = 1.0 + (4.0f64 / 3.0).ln();
        let i1 = 1.0 + 2.0f64.ln();
        let na = (i2 * i2 + i1 * i1).sqrt();
        let nb = (i1 * i1 + 4.0 * i2 * i2).sqrt();
        let nc = (2.0 * i2 * i2).sqrt();
        let close = |x: f64, y: f64| assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        close(v[0].weights["car"], i2 / na);
        close(v[0].weights["stops"], i1 / na);
        close(v[1].weights["red"], i1 / nb);
        close(v[1].weights["light"], 2.0 * i2 / nb);
        close(v[2].weights["car"], i2 / nc);
        close(v[2].weights["light"], i2 / nc);
        assert!(v.iter().all(|x| x.weights.values().all(|&w| w >= 0.0)));
    }

    #[test]
    fn empty_text_is_a_flagged_zero_vector() {
        let v = vectorize(&docs(&[("a", "!!!"), ("b", "go")])).unwrap();
        assert!(v[0].degenerate && v[0].weights.is_empty());
        assert_eq!(cosine_distance(&v[0], &v[1]), 1.0);
        assert_eq!(cosine_distance(&v[0], &v[0]), 1.0);
        assert!(matches!(vectorize(&BTreeMap::new()), Err(ClusterError::EmptyCorpus)));
    }

    #[test]
    fn cosine_examples() {
        let a = tv("a", &[("x", 1.0), ("y", 1.0)]);
        let b = tv("b", &[("x", 1.0)]);
        let c = tv("c", &[("z", 2.0)]);
        assert!(cosine_distance(&a, &a).abs() < 1e-15);
        assert_eq!(cosine_distance(&b, &c), 1.0);
        assert!((cosine_distance(&a, &b) - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-12);
        assert!((cosine_distance(&a, &b) - 0.2929).abs() < 1e-4);
    }

    #[test]
    fn k_extremes() {
        let v = vectorize(&docs(&[("a", "x y"), ("b", "y z"), ("c", "z w"), ("d", "w")])).unwrap();
        let (d, all) = agglomerate(&v, 4).unwrap();
        assert_eq!(d.merges.len(), 3);
        let labels: BTreeSet<usize> = all.values().copied().collect();
        assert_eq!(labels.len(), 4);
        let (_, one) = agglomerate(&v, 1).unwrap();
        assert!(one.values().all(|&c| c == 0));
        assert!(matches!(agglomerate(&v, 0), Err(ClusterError::KOutOfRange { .. })));
        assert!(matches!(agglomerate(&v, 5), Err(ClusterError::KOutOfRange { .. })));
    }

    #[test]
    fn medoid_examples() {
        let v = vec![tv("s", &[("a", 1.0)])];
        let asg: BTreeMap<String, usize> = [("s".to_string(), 0)].into();
        assert_eq!(medoids(&asg, &v).unwrap()[&0].vid, "s");

        // Three orthogonal unit vectors are pairwise equidistant.
        let v = vec![tv("q", &[("a", 1.0)]), tv("p", &[("b", 1.0)]), tv("r", &[("c", 1.0)])];
        let asg: BTreeMap<String, usize> = v.iter().map(|x| (x.vid.clone(), 0)).collect();
        let m = medoids(&asg, &v).unwrap();
        assert_eq!(m[&0].vid, "p");
        assert_eq!(m[&0].medoid_distance, 1.0);
    }
}
