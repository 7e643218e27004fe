//! Natural-adversarial frontier: normalization, Pareto extraction, AUC and
//! export.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine map from robot return to adversarialness. `lo` and `hi` are
/// negated returns: `lo` for the cooperative partner, `hi` for the pure
/// adversary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub lo: f64,
    pub hi: f64,
}

impl Normalization {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::contract(format!(
                "normalization needs finite lo < hi, got ({lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// From the mean robot return with the cooperative partner and with the
    /// λ≈0 adversary.
    pub fn from_returns(cooperative: f64, adversarial: f64) -> Result<Self> {
        Self::new(-cooperative, -adversarial)
    }

    pub fn adversarialness(&self, robot_return: f64) -> f64 {
        normalize_adversarialness(robot_return, self.lo, self.hi)
            .expect("validated on construction")
    }
}

/// `clamp((−return − lo) / (hi − lo), 0, 1)`
pub fn normalize_adversarialness(robot_return: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::contract(format!(
            "normalization needs lo < hi, got ({lo}, {hi})"
        )));
    }
    Ok(((-robot_return - lo) / (hi - lo)).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub run_id: String,
    pub lambda: f64,
    pub seed: u64,
    pub naturalness: f64,
    pub adversarialness: f64,
}

impl FrontierPoint {
    pub fn dominates(&self, other: &FrontierPoint) -> bool {
        self.naturalness >= other.naturalness
            && self.adversarialness >= other.adversarialness
            && (self.naturalness > other.naturalness
                || self.adversarialness > other.adversarialness)
    }

    fn same_coords(&self, other: &FrontierPoint) -> bool {
        self.naturalness == other.naturalness && self.adversarialness == other.adversarialness
    }
}

/// Non-dominated points, one per distinct coordinate pair, sorted by
/// naturalness ascending. Among duplicates the lowest λ (then run id) is
/// kept.
pub fn pareto_extract(points: &[FrontierPoint]) -> Vec<FrontierPoint> {
    let mut sorted: Vec<&FrontierPoint> = points.iter().collect();
    sorted.sort_by(|a, b| {
        a.naturalness
            .total_cmp(&b.naturalness)
            .then(b.adversarialness.total_cmp(&a.adversarialness))
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.run_id.cmp(&b.run_id))
    });
    let mut out: Vec<FrontierPoint> = Vec::new();
    for p in sorted {
        if out.last().is_some_and(|q| q.same_coords(p)) {
            continue;
        }
        if points.iter().any(|q| q.dominates(p)) {
            continue;
        }
        out.push(p.clone());
    }
    out
}

/// Area under the Pareto polyline over naturalness ∈ [0, 1], extended
/// horizontally from the extreme points to both edges.
pub fn auc(pareto: &[FrontierPoint]) -> Result<f64> {
    let first = pareto
        .first()
        .ok_or_else(|| Error::contract("AUC of an empty frontier"))?;
    let last = pareto.last().expect("nonempty");
    if pareto
        .windows(2)
        .any(|w| w[1].naturalness < w[0].naturalness)
    {
        return Err(Error::contract("frontier must be sorted by naturalness"));
    }
    let mut area = first.adversarialness * first.naturalness;
    for w in pareto.windows(2) {
        area += 0.5
            * (w[0].adversarialness + w[1].adversarialness)
            * (w[1].naturalness - w[0].naturalness);
    }
    area += last.adversarialness * (1.0 - last.naturalness);
    Ok(area)
}

/// One attack run as it enters a frontier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPoint {
    pub run_id: String,
    pub lambda: f64,
    pub seed: u64,
    pub naturalness: f64,
    pub robot_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub all_points: Vec<FrontierPoint>,
    pub pareto_points: Vec<FrontierPoint>,
    pub auc: f64,
    pub normalization: Normalization,
}

impl Frontier {
    pub fn build(runs: &[RunPoint], normalization: Normalization) -> Result<Self> {
        let all_points: Vec<FrontierPoint> = runs
            .iter()
            .map(|r| FrontierPoint {
                run_id: r.run_id.clone(),
                lambda: r.lambda,
                seed: r.seed,
                naturalness: r.naturalness.clamp(0.0, 1.0),
                adversarialness: normalization.adversarialness(r.robot_return),
            })
            .collect();
        Self::from_points(all_points, normalization)
    }

    pub fn from_points(
        all_points: Vec<FrontierPoint>,
        normalization: Normalization,
    ) -> Result<Self> {
        if all_points.is_empty() {
            return Err(Error::contract(
                "frontier needs at least one successful run",
            ));
        }
        let pareto_points = pareto_extract(&all_points);
        let auc = auc(&pareto_points)?;
        Ok(Self {
            all_points,
            pareto_points,
            auc,
            normalization,
        })
    }

    fn on_pareto(&self, p: &FrontierPoint) -> bool {
        self.pareto_points.iter().any(|q| q.run_id == p.run_id)
    }

    pub const CSV_HEADER: &'static str =
        "run_id,lambda,seed,naturalness,adversarialness,pareto_flag";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for p in &self.all_points {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                p.run_id,
                p.lambda,
                p.seed,
                p.naturalness,
                p.adversarialness,
                u8::from(self.on_pareto(p))
            );
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("frontier serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Scatter of every run plus the extended Pareto polyline.
    pub fn to_svg(&self) -> String {
        const W: f64 = 480.0;
        const M: f64 = 48.0;
        let x = |nat: f64| M + nat * (W - 2.0 * M);
        let y = |adv: f64| W - M - adv * (W - 2.0 * M);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{W}" viewBox="0 0 {W} {W}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            s,
            r#"<rect x="0" y="0" width="{W}" height="{W}" fill="white"/>"#
        );
        let _ = writeln!(
            s,
            r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * M,
            W - 2.0 * M
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">naturalness</text>"#,
            W / 2.0,
            W - 12.0
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">adversarialness</text>"#,
            W / 2.0,
            W / 2.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">AUC {:.4}</text>"#,
            W - M,
            M - 10.0,
            self.auc
        );
        let first = &self.pareto_points[0];
        let last = self.pareto_points.last().expect("nonempty");
        let mut pts = vec![(0.0, first.adversarialness)];
        pts.extend(
            self.pareto_points
                .iter()
                .map(|p| (p.naturalness, p.adversarialness)),
        );
        pts.push((1.0, last.adversarialness));
        let coords: Vec<String> = pts
            .iter()
            .map(|&(n, a)| format!("{:.2},{:.2}", x(n), y(a)))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline fill="none" stroke="#c0392b" stroke-width="2" points="{}"/>"##,
            coords.join(" ")
        );
        for p in &self.all_points {
            let _ = writeln!(
                s,
                r##"<circle class="run" cx="{:.2}" cy="{:.2}" r="4" fill="#2c3e50" fill-opacity="0.7"><title>{} λ={} seed={}</title></circle>"##,
                x(p.naturalness),
                y(p.adversarialness),
                p.run_id,
                p.lambda,
                p.seed
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Recomputes the AUC from the rows of a `frontier.csv`.
pub fn auc_from_csv(text: &str) -> Result<f64> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(Error::contract(format!(
                "frontier.csv line {}: expected 6 fields",
                i + 1
            )));
        }
        let num = |k: usize| -> Result<f64> {
            f[k].parse().map_err(|_| {
                Error::contract(format!(
                    "frontier.csv line {}: bad number {:?}",
                    i + 1,
                    f[k]
                ))
            })
        };
        points.push(FrontierPoint {
            run_id: f[0].to_string(),
            lambda: num(1)?,
            seed: f[2]
                .parse()
                .map_err(|_| Error::contract(format!("frontier.csv line {}: bad seed", i + 1)))?,
            naturalness: num(3)?,
            adversarialness: num(4)?,
        });
    }
    auc(&pareto_extract(&points))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}
