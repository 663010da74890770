//! Compact quotient by a genus-2 Fuchsian group: Dirichlet domain centered at
//! `i`, reduction into it, and Liouville sampling.

use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{
    cosh_distance, from_chart_direction, hyperbolic_distance, ChartPhasePoint, GroupElement,
};

/// Slack used by the Dirichlet half-plane tests, on the `cosh d` scale.
pub const DOMAIN_SLACK: f64 = 1e-9;
/// Default word length of the cached group elements.
pub const DEFAULT_WORD_LENGTH: usize = 4;
const MAX_REDUCTION_STEPS: usize = 10_000;
const RELATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CachedWord {
    pub element: GroupElement,
    /// Indices into [`FuchsianGroup::pairings`], applied left to right.
    pub word: Vec<u8>,
}

/// One letter of the surface relation: generator index and whether it is inverted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Letter {
    pub generator: usize,
    pub inverse: bool,
}

#[derive(Debug, Clone)]
pub struct FuchsianGroup {
    generators: Vec<GroupElement>,
    /// The four generators followed by their inverses.
    pairings: Vec<GroupElement>,
    /// `pairings[k]·i`.
    pairing_points: Vec<Complex64>,
    relation: Vec<Letter>,
    word_cache: Vec<CachedWord>,
    domain_radius: f64,
    bounding_box: [f64; 4],
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Pairing(usize),
    Cached(usize),
}

#[derive(Debug, Clone)]
pub struct ReducedPoint {
    pub g: GroupElement,
    /// Product of all applied pairings; `g = gamma · input`.
    pub gamma: GroupElement,
    pub word: Vec<u8>,
}

/// Sampler bookkeeping from a rejection run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerStats {
    pub accepted: u64,
    pub attempts: u64,
    /// Hyperbolic area of the sampling box.
    pub box_area: f64,
}

impl SamplerStats {
    pub fn acceptance(&self) -> f64 {
        self.accepted as f64 / self.attempts as f64
    }

    pub fn area_estimate(&self) -> f64 {
        self.box_area * self.acceptance()
    }
}

/// Length of the translation of each Bolza generator (also its systole).
pub fn bolza_translation_length() -> f64 {
    2.0 * (1.0 + 2f64.sqrt()).acosh()
}

/// The Bolza surface group: side pairings of the regular octagon with vertex
/// angle π/4 centered at `i`.
pub fn bolza_group() -> FuchsianGroup {
    let t = GroupElement::diagonal(bolza_translation_length());
    let gens = (0..4)
        .map(|k| {
            let r = GroupElement::rotation(k as f64 * FRAC_PI_4);
            r * t * r.inverse()
        })
        .collect();
    FuchsianGroup::from_generators(gens).expect("the Bolza generators form a surface group")
}

impl FuchsianGroup {
    /// Builds the group from four hyperbolic generators whose eight
    /// translates of `i` define the Dirichlet domain.
    pub fn from_generators(generators: Vec<GroupElement>) -> Result<Self> {
        if generators.len() != 4 {
            return Err(Error::InvalidInput(format!(
                "expected 4 generators, got {}",
                generators.len()
            )));
        }
        for (k, g) in generators.iter().enumerate() {
            if g.trace().abs() <= 2.0 {
                return Err(Error::InvalidInput(format!(
                    "generator {k} is not hyperbolic (trace {})",
                    g.trace()
                )));
            }
        }
        let relation = find_relation(&generators).ok_or_else(|| {
            Error::InvalidInput("no genus-2 surface relation among the generators".into())
        })?;
        let mut pairings = generators.clone();
        pairings.extend(generators.iter().map(|g| g.inverse()));
        let pairing_points = pairings.iter().map(|g| g.base_point()).collect();
        let mut group = Self {
            generators,
            pairings,
            pairing_points,
            relation,
            word_cache: Vec::new(),
            domain_radius: 0.0,
            bounding_box: [0.0; 4],
        };
        group.word_cache = group.build_word_cache(DEFAULT_WORD_LENGTH);
        let (radius, bbox) = group.scan_domain();
        group.domain_radius = radius;
        group.bounding_box = bbox;
        Ok(group)
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    pub fn pairings(&self) -> &[GroupElement] {
        &self.pairings
    }

    pub fn pairing_points(&self) -> &[Complex64] {
        &self.pairing_points
    }

    pub fn relation(&self) -> &[Letter] {
        &self.relation
    }

    pub fn word_cache(&self) -> &[CachedWord] {
        &self.word_cache
    }

    /// Circumradius of the Dirichlet domain around `i`.
    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    /// Euclidean box `[u_min, u_max, v_min, v_max]` containing the domain.
    pub fn bounding_box(&self) -> [f64; 4] {
        self.bounding_box
    }

    pub fn relation_product(&self) -> GroupElement {
        relation_product(&self.generators, &self.relation)
    }

    /// Entrywise distance of the relation product from the identity.
    pub fn relation_residual(&self) -> f64 {
        self.relation_product().distance_entries(&GroupElement::identity())
    }

    pub fn in_domain(&self, z: Complex64) -> bool {
        let c0 = cosh_distance(z, Complex64::i());
        self.pairing_points
            .iter()
            .all(|&p| c0 <= cosh_distance(z, p) + DOMAIN_SLACK)
    }

    fn in_domain_strict(&self, z: Complex64) -> bool {
        let c0 = cosh_distance(z, Complex64::i());
        self.pairing_points.iter().all(|&p| c0 <= cosh_distance(z, p))
    }

    /// Greedy Dirichlet descent of a base point; returns the reduced point
    /// and the group element that maps the input onto it.
    pub fn reduce_point(&self, z: Complex64) -> Result<(Complex64, GroupElement)> {
        let mut z = z;
        let mut gamma = GroupElement::identity();
        for _ in 0..MAX_REDUCTION_STEPS {
            match self.descent_step(z) {
                None => return Ok((z, gamma)),
                Some(step) => {
                    let step = self.step_element(step);
                    z = step.act(z);
                    gamma = step * gamma;
                }
            }
        }
        Err(Error::ReductionStall { distance: hyperbolic_distance(z, Complex64::i()) })
    }

    /// Element to apply next, or `None` once `z` lies in the domain.
    fn descent_step(&self, z: Complex64) -> Option<Step> {
        let c0 = cosh_distance(z, Complex64::i());
        let mut best = (c0, usize::MAX);
        for (k, &p) in self.pairing_points.iter().enumerate() {
            let c = cosh_distance(z, p);
            if c + DOMAIN_SLACK < best.0 {
                best = (c, k);
            }
        }
        if best.1 != usize::MAX {
            // d(g⁻¹z, i) = d(z, g·i)
            return Some(Step::Pairing((best.1 + 4) % 8));
        }
        if self.in_domain(z) {
            return None;
        }
        let mut best = (c0, None);
        for (k, w) in self.word_cache.iter().enumerate() {
            let c = cosh_distance(w.element.act(z), Complex64::i());
            if c + DOMAIN_SLACK < best.0 {
                best = (c, Some(k));
            }
        }
        best.1.map(Step::Cached)
    }

    fn step_element(&self, step: Step) -> GroupElement {
        match step {
            Step::Pairing(k) => self.pairings[k],
            Step::Cached(k) => self.word_cache[k].element,
        }
    }

    /// Reduces a phase-space point so that its base point lies in the domain.
    pub fn reduce(&self, g: &GroupElement) -> Result<ReducedPoint> {
        let mut cur = *g;
        let mut gamma = GroupElement::identity();
        let mut word = Vec::new();
        for _ in 0..MAX_REDUCTION_STEPS {
            match self.descent_step(cur.base_point()) {
                None => {
                    let d = hyperbolic_distance(cur.base_point(), Complex64::i());
                    if d > self.domain_radius + 1e-9 {
                        return Err(Error::ReductionStall { distance: d });
                    }
                    return Ok(ReducedPoint { g: cur, gamma, word });
                }
                Some(step) => {
                    match step {
                        Step::Pairing(k) => word.push(k as u8),
                        Step::Cached(k) => word.extend(&self.word_cache[k].word),
                    }
                    let step = self.step_element(step);
                    cur = step * cur;
                    gamma = step * gamma;
                }
            }
        }
        Err(Error::ReductionStall { distance: hyperbolic_distance(cur.base_point(), Complex64::i()) })
    }

    /// Reduces a chart point, transporting its covector.
    pub fn reduce_chart(&self, p: &ChartPhasePoint) -> Result<ChartPhasePoint> {
        let (_, gamma) = self.reduce_point(p.base())?;
        Ok(p.transport(&gamma))
    }

    fn build_word_cache(&self, max_len: usize) -> Vec<CachedWord> {
        let mut out: Vec<CachedWord> = Vec::new();
        let mut frontier = vec![CachedWord { element: GroupElement::identity(), word: Vec::new() }];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &frontier {
                for (k, p) in self.pairings.iter().enumerate() {
                    if let Some(&last) = w.word.last() {
                        if (last as usize + 4) % 8 == k {
                            continue;
                        }
                    }
                    let element = *p * w.element;
                    if element.approx_eq(&GroupElement::identity(), 1e-9)
                        || out.iter().chain(&next).any(|c: &CachedWord| c.element.approx_eq(&element, 1e-9))
                    {
                        continue;
                    }
                    let mut word = w.word.clone();
                    word.push(k as u8);
                    next.push(CachedWord { element, word });
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    /// Circumradius and bounding box from a radial scan of the boundary.
    fn scan_domain(&self) -> (f64, [f64; 4]) {
        let n = 7200;
        let mut radii = Vec::with_capacity(n);
        let mut bbox = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for k in 0..n {
            let phi = 2.0 * PI * k as f64 / n as f64;
            let r = self.boundary_radius(phi);
            radii.push(r);
            let z = radial_point(phi, r);
            bbox[0] = bbox[0].min(z.re);
            bbox[1] = bbox[1].max(z.re);
            bbox[2] = bbox[2].min(z.im);
            bbox[3] = bbox[3].max(z.im);
        }
        // refine each local maximum of the radial profile by golden-section search
        let step = 2.0 * PI / n as f64;
        let mut radius = 0.0f64;
        for k in 0..n {
            let prev = radii[(k + n - 1) % n];
            let next = radii[(k + 1) % n];
            if radii[k] >= prev && radii[k] >= next {
                let phi = k as f64 * step;
                radius = radius.max(self.refine_max(phi - step, phi + step));
            }
        }
        let du = 1e-3 * (bbox[1] - bbox[0]);
        let pad_lo = 1.0 - 1e-3;
        let pad_hi = 1.0 + 1e-3;
        (
            radius + 1e-12,
            [bbox[0] - du, bbox[1] + du, bbox[2] * pad_lo, bbox[3] * pad_hi],
        )
    }

    fn boundary_radius(&self, phi: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 20.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.in_domain_strict(radial_point(phi, mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    fn refine_max(&self, mut a: f64, mut b: f64) -> f64 {
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - gr * (b - a);
        let mut d = a + gr * (b - a);
        let mut fc = self.boundary_radius(c);
        let mut fd = self.boundary_radius(d);
        for _ in 0..60 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - gr * (b - a);
                fc = self.boundary_radius(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + gr * (b - a);
                fd = self.boundary_radius(d);
            }
        }
        fc.max(fd)
    }

    fn sampling_box_area(&self) -> f64 {
        let [u0, u1, v0, v1] = self.bounding_box;
        (u1 - u0) * (1.0 / v0 - 1.0 / v1)
    }

    /// Liouville samples; the generator state is seeded from `seed` only.
    pub fn sample_liouville(&self, n: usize, seed: u64) -> Result<Vec<GroupElement>> {
        self.sample_liouville_with_stats(n, seed, 0).map(|(s, _)| s)
    }

    /// Liouville samples drawn from an independent stream of the same seed.
    pub fn sample_liouville_with_stats(
        &self,
        n: usize,
        seed: u64,
        stream: u64,
    ) -> Result<(Vec<GroupElement>, SamplerStats)> {
        if n == 0 {
            return Err(Error::InvalidInput("sample count must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let [u0, u1, v0, v1] = self.bounding_box;
        let (w0, w1) = (1.0 / v1, 1.0 / v0);
        let max_attempts = 100 * n as u64 + 1000;
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0u64;
        while out.len() < n {
            if attempts >= max_attempts {
                return Err(Error::RejectionFailure { rate: out.len() as f64 / attempts as f64 });
            }
            attempts += 1;
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            let th: f64 = rng.random();
            // density ∝ 1/v² on [v0, v1] through uniform 1/v
            let v = 1.0 / (w0 + y * (w1 - w0));
            let z = Complex64::new(u0 + x * (u1 - u0), v);
            if self.in_domain(z) {
                let p = ChartPhasePoint::from_angle(z, 2.0 * PI * th, 1.0);
                out.push(from_chart_direction(&p));
            }
        }
        let stats = SamplerStats { accepted: n as u64, attempts, box_area: self.sampling_box_area() };
        if stats.acceptance() < 0.01 {
            return Err(Error::RejectionFailure { rate: stats.acceptance() });
        }
        Ok((out, stats))
    }

    /// Hyperbolic area of the domain from the sampler's acceptance rate.
    pub fn estimate_domain_area(&self, n: usize, seed: u64) -> Result<f64> {
        self.sample_liouville_with_stats(n, seed, 0).map(|(_, s)| s.area_estimate())
    }

    /// Text description: one generator per line, row-major entries.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# genus-2 Fuchsian group: one generator per line, entries a b c d\n");
        for g in &self.generators {
            let [a, b, c, d] = g.entries();
            let _ = writeln!(s, "{a:?} {b:?} {c:?} {d:?}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut gens = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })?;
            if vals.len() != 4 {
                return Err(Error::Parse { line: i + 1, msg: format!("expected 4 entries, got {}", vals.len()) });
            }
            gens.push(GroupElement::new(vals[0], vals[1], vals[2], vals[3])?);
        }
        Self::from_generators(gens)
    }
}

/// Point at hyperbolic distance `r` from `i` in direction `phi` (counterclockwise from up).
pub fn radial_point(phi: f64, r: f64) -> Complex64 {
    GroupElement::rotation(phi).act(Complex64::new(0.0, r.exp()))
}

fn relation_product(gens: &[GroupElement], word: &[Letter]) -> GroupElement {
    word.iter().fold(GroupElement::identity(), |acc, l| {
        let g = if l.inverse { gens[l.generator].inverse() } else { gens[l.generator] };
        acc * g
    })
}

/// Searches words `a b c d a⁻¹ b⁻¹ c⁻¹ d⁻¹` over orderings and signs of the
/// generators for one that equals the identity.
fn find_relation(gens: &[GroupElement]) -> Option<Vec<Letter>> {
    let perms = permutations4();
    for perm in perms {
        for signs in 0..16u32 {
            let first: Vec<Letter> = (0..4)
                .map(|i| Letter { generator: perm[i], inverse: signs & (1 << i) != 0 })
                .collect();
            let mut word = first.clone();
            word.extend(first.iter().map(|l| Letter { generator: l.generator, inverse: !l.inverse }));
            let p = relation_product(gens, &word);
            if p.distance_entries(&GroupElement::identity()) < RELATION_TOL {
                return Some(word);
            }
        }
    }
    None
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let mut seen = [false; 4];
                    p.iter().for_each(|&x| seen[x] = true);
                    if seen.iter().all(|&s| s) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}
