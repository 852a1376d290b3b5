use std::fmt;

use crate::error::{bail, Result};

/// The three variables of a two-source, one-target system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variable {
    X1,
    X2,
    Y,
}

impl Variable {
    fn axis(self) -> usize {
        self as usize
    }
}

/// Probability mass over `(x1, x2, y)`, stored at index `(x1·|X2| + x2)·|Y| + y`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    cards: [usize; 3],
    pmf: Vec<f64>,
}

/// Tolerance on the total mass accepted by [`JointDistribution::new`].
pub const MASS_TOLERANCE: f64 = 1e-9;

impl JointDistribution {
    /// Validates the mass (nonnegative, total within [`MASS_TOLERANCE`] of 1) and
    /// renormalizes so the stored total is 1 to rounding.
    pub fn new(cards: [usize; 3], pmf: Vec<f64>) -> Result<Self> {
        if cards.contains(&0) {
            bail!(Distribution, "cardinalities must be positive, got {cards:?}");
        }
        let n: usize = cards.iter().product();
        if pmf.len() != n {
            bail!(
                Distribution,
                "cardinalities {cards:?} need {n} probabilities, got {}",
                pmf.len()
            );
        }
        if let Some(p) = pmf.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            bail!(Distribution, "invalid probability mass {p}");
        }
        let total = crate::numerics::exact_sum(&pmf);
        if (total - 1.0).abs() > MASS_TOLERANCE {
            bail!(Distribution, "probabilities sum to {total}, not 1");
        }
        let pmf = pmf.into_iter().map(|p| p / total).collect();
        Ok(Self { cards, pmf })
    }

    /// Normalized histogram of nonnegative counts.
    pub fn from_counts(cards: [usize; 3], counts: &[f64]) -> Result<Self> {
        let total = crate::numerics::exact_sum(counts);
        if !(total > 0.0) {
            bail!(Distribution, "counts sum to {total}");
        }
        Self::new(cards, counts.iter().map(|c| c / total).collect())
    }

    pub fn cards(&self) -> [usize; 3] {
        self.cards
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn prob(&self, x1: usize, x2: usize, y: usize) -> f64 {
        self.pmf[self.index([x1, x2, y])]
    }

    fn index(&self, a: [usize; 3]) -> usize {
        (a[0] * self.cards[1] + a[1]) * self.cards[2] + a[2]
    }

    fn assignments(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [n1, n2, n3] = self.cards;
        (0..n1).flat_map(move |a| (0..n2).flat_map(move |b| (0..n3).map(move |c| [a, b, c])))
    }

    /// X1, X2 independent fair bits, Y = X1 ⊕ X2.
    pub fn xor() -> Self {
        let mut pmf = vec![0.0; 8];
        for a in 0..2 {
            for b in 0..2 {
                pmf[(a * 2 + b) * 2 + (a ^ b)] = 0.25;
            }
        }
        Self { cards: [2, 2, 2], pmf }
    }

    /// X1 = X2 = Y, one fair bit.
    pub fn copy() -> Self {
        let mut pmf = vec![0.0; 8];
        pmf[0] = 0.5;
        pmf[7] = 0.5;
        Self { cards: [2, 2, 2], pmf }
    }

    /// Three independent fair bits.
    pub fn independent() -> Self {
        Self {
            cards: [2, 2, 2],
            pmf: vec![0.125; 8],
        }
    }

    /// Parses the text form: a `cards n1 n2 n3` line, then `x1 x2 y p` lines. `#` starts
    /// a comment; unlisted triples have probability 0.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cards: Option<[usize; 3]> = None;
        let mut pmf: Vec<Option<f64>> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match (cards, fields.as_slice()) {
                (None, ["cards", a, b, c]) => {
                    let parsed: Vec<usize> = [a, b, c].iter().filter_map(|v| v.parse().ok()).collect();
                    let [a, b, c] = parsed[..] else {
                        bail!(Distribution, "line {}: bad cardinalities {line:?}", n + 1);
                    };
                    if a * b * c == 0 {
                        bail!(Distribution, "line {}: cardinalities must be positive", n + 1);
                    }
                    cards = Some([a, b, c]);
                    pmf = vec![None; a * b * c];
                }
                (None, _) => bail!(Distribution, "line {}: expected `cards n1 n2 n3` first", n + 1),
                (Some(k), [x1, x2, y, p]) => {
                    let idx: Vec<usize> = [x1, x2, y].iter().filter_map(|v| v.parse().ok()).collect();
                    let (Ok(p), &[a, b, c]) = (p.parse::<f64>(), idx.as_slice()) else {
                        bail!(Distribution, "line {}: expected `x1 x2 y p`, got {line:?}", n + 1);
                    };
                    if a >= k[0] || b >= k[1] || c >= k[2] {
                        bail!(Distribution, "line {}: outcome ({a}, {b}, {c}) outside {k:?}", n + 1);
                    }
                    let slot = &mut pmf[(a * k[1] + b) * k[2] + c];
                    if slot.replace(p).is_some() {
                        bail!(Distribution, "line {}: outcome ({a}, {b}, {c}) listed twice", n + 1);
                    }
                }
                (Some(_), _) => bail!(Distribution, "line {}: expected `x1 x2 y p`, got {line:?}", n + 1),
            }
        }
        let Some(cards) = cards else {
            bail!(Distribution, "no `cards` line");
        };
        Self::new(cards, pmf.into_iter().map(|p| p.unwrap_or(0.0)).collect())
    }

    /// Inverse of [`JointDistribution::parse`], listing nonzero outcomes.
    pub fn to_text(&self) -> String {
        let [a, b, c] = self.cards;
        let mut out = format!("cards {a} {b} {c}\n");
        for k in self.assignments() {
            let p = self.pmf[self.index(k)];
            if p != 0.0 {
                out.push_str(&format!("{} {} {} {p}\n", k[0], k[1], k[2]));
            }
        }
        out
    }

    fn marginal(&self, vars: &[usize]) -> Marginal {
        let cards: Vec<usize> = vars.iter().map(|&v| self.cards[v]).collect();
        let mut p = vec![0.0; cards.iter().product()];
        let m = Marginal {
            vars: vars.to_vec(),
            cards,
            p: Vec::new(),
        };
        for a in self.assignments() {
            p[m.key(a)] += self.pmf[self.index(a)];
        }
        Marginal { p, ..m }
    }
}

struct Marginal {
    vars: Vec<usize>,
    cards: Vec<usize>,
    p: Vec<f64>,
}

impl Marginal {
    fn key(&self, a: [usize; 3]) -> usize {
        self.vars
            .iter()
            .zip(&self.cards)
            .fold(0, |k, (&v, &c)| k * c + a[v])
    }

    fn get(&self, a: [usize; 3]) -> f64 {
        self.p[self.key(a)]
    }
}

/// Shannon entropy in bits, `0·log 0 = 0`.
pub fn entropy(pmf: &[f64]) -> Result<f64> {
    if let Some(p) = pmf.iter().find(|p| !(**p >= 0.0)) {
        bail!(Distribution, "negative probability mass {p}");
    }
    Ok(-pmf
        .iter()
        .filter(|&&p| p > 0.0)
        .fold(0.0, |acc, &p| acc + p * p.log2()))
}

fn axes(group: &[Variable]) -> Vec<usize> {
    let mut v: Vec<usize> = group.iter().map(|g| g.axis()).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// `I(A; B)` in bits.
pub fn mutual_info(joint: &JointDistribution, a: &[Variable], b: &[Variable]) -> Result<f64> {
    cond_mutual_info(joint, a, b, &[])
}

/// `I(A; B | C)` in bits; zero-probability conditioning events contribute nothing.
pub fn cond_mutual_info(joint: &JointDistribution, a: &[Variable], b: &[Variable], c: &[Variable]) -> Result<f64> {
    let (a, b, c) = (axes(a), axes(b), axes(c));
    if a.is_empty() || b.is_empty() {
        bail!(Usage, "mutual information needs two nonempty groups");
    }
    let overlaps = |x: &[usize], y: &[usize]| x.iter().any(|v| y.contains(v));
    if overlaps(&a, &b) || overlaps(&a, &c) || overlaps(&b, &c) {
        bail!(Usage, "variable groups must be disjoint");
    }
    let join = |x: &[usize], y: &[usize]| {
        let mut v = [x, y].concat();
        v.sort_unstable();
        v
    };
    let all = join(&join(&a, &b), &c);
    let m_all = joint.marginal(&all);
    let m_ac = joint.marginal(&join(&a, &c));
    let m_bc = joint.marginal(&join(&b, &c));
    let m_c = joint.marginal(&c);
    let mut total = 0.0;
    // visit each assignment of the union once: axes outside it are pinned to 0
    for x in joint.assignments().filter(|x| (0..3).all(|v| all.contains(&v) || x[v] == 0)) {
        let p = m_all.get(x);
        if p > 0.0 {
            total += p * (p * m_c.get(x) / (m_ac.get(x) * m_bc.get(x))).log2();
        }
    }
    Ok(total)
}

/// Decomposition of `I(X1, X2; Y)` with unique = conditional MI and redundancy = `I(X1; X2)`.
///
/// With these definitions `S − R` is not the same quantity as the interaction information
/// `I(X1,X2;Y) − I(X1;Y) − I(X2;Y)` (they disagree on XOR), so both are reported.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PidResult {
    /// `I(X1; Y | X2)`
    pub unique1: f64,
    /// `I(X2; Y | X1)`
    pub unique2: f64,
    /// `I(X1; X2)`
    pub redundancy: f64,
    /// `I(X1,X2;Y) − unique1 − unique2 − redundancy`
    pub synergy: f64,
    /// `I(X1, X2; Y)`
    pub total: f64,
    /// `I(X1,X2;Y) − I(X1;Y) − I(X2;Y)`
    pub interaction: f64,
    /// `synergy − redundancy`
    pub interaction_sr: f64,
}

impl fmt::Display for PidResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "total        I(X1,X2;Y)              = {:+.6} bits", self.total)?;
        writeln!(f, "unique1      I(X1;Y|X2)              = {:+.6} bits", self.unique1)?;
        writeln!(f, "unique2      I(X2;Y|X1)              = {:+.6} bits", self.unique2)?;
        writeln!(f, "redundancy   I(X1;X2)                = {:+.6} bits", self.redundancy)?;
        writeln!(f, "synergy      total-U1-U2-R           = {:+.6} bits", self.synergy)?;
        writeln!(f, "interaction  I(X1,X2;Y)-I(X1;Y)-I(X2;Y) = {:+.6} bits", self.interaction)?;
        write!(f, "interaction  S-R route               = {:+.6} bits", self.interaction_sr)
    }
}

pub fn pid_decompose(joint: &JointDistribution) -> Result<PidResult> {
    use Variable::*;
    let total = mutual_info(joint, &[X1, X2], &[Y])?;
    let unique1 = cond_mutual_info(joint, &[X1], &[Y], &[X2])?;
    let unique2 = cond_mutual_info(joint, &[X2], &[Y], &[X1])?;
    let redundancy = mutual_info(joint, &[X1], &[X2])?;
    let synergy = total - unique1 - unique2 - redundancy;
    Ok(PidResult {
        unique1,
        unique2,
        redundancy,
        synergy,
        total,
        interaction: interaction_info(joint)?,
        interaction_sr: synergy - redundancy,
    })
}

/// Interaction information in bits, `I(X1,X2;Y) − I(X2;Y) − I(X1;Y)`.
///
/// Also evaluates `I(X1;Y|X2) − I(X1;Y)` and fails if the two disagree by more than 1e-9.
pub fn interaction_info(joint: &JointDistribution) -> Result<f64> {
    use Variable::*;
    let i1y = mutual_info(joint, &[X1], &[Y])?;
    let by_totals = mutual_info(joint, &[X1, X2], &[Y])? - mutual_info(joint, &[X2], &[Y])? - i1y;
    let by_conditional = cond_mutual_info(joint, &[X1], &[Y], &[X2])? - i1y;
    if (by_totals - by_conditional).abs() > 1e-9 {
        bail!(
            Numeric,
            "interaction information routes disagree: {by_totals} vs {by_conditional}"
        );
    }
    Ok(by_totals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use Variable::*;

    #[test]
    fn text_form() {
        let xor = JointDistribution::parse("# xor\ncards 2 2 2\n0 0 0 0.25\n0 1 1 0.25\n1 0 1 0.25\n1 1 0 0.25\n").unwrap();
        assert_eq!(xor, JointDistribution::xor());
        assert_eq!(JointDistribution::parse(&JointDistribution::copy().to_text()).unwrap(), JointDistribution::copy());
        for bad in [
            "",
            "0 0 0 1\n",
            "cards 2 2\n",
            "cards 2 0 2\n0 0 0 1\n",
            "cards 2 2 2\n0 0 0 0.5\n",
            "cards 2 2 2\n0 0 0 0.5\n0 0 0 0.5\n",
            "cards 2 2 2\n2 0 0 1\n",
            "cards 2 2 2\n0 0 x 1\n",
        ] {
            assert!(matches!(JointDistribution::parse(bad), Err(crate::Error::Distribution(_))), "{bad:?}");
        }
    }

    /// Entropy-based oracle: I(A;B|C) = H(A,C) + H(B,C) − H(A,B,C) − H(C), with each
    /// entropy computed by summing the joint directly over the kept axes.
    fn oracle_cmi(j: &JointDistribution, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        let h = |keep: &[usize]| -> f64 {
            let mut cells = std::collections::BTreeMap::<Vec<usize>, f64>::new();
            let [n1, n2, n3] = j.cards();
            for x1 in 0..n1 {
                for x2 in 0..n2 {
                    for y in 0..n3 {
                        let a = [x1, x2, y];
                        let key = keep.iter().map(|&v| a[v]).collect();
                        *cells.entry(key).or_default() += j.prob(x1, x2, y);
                    }
                }
            }
            cells.values().filter(|&&p| p > 0.0).map(|p| -p * p.log2()).sum()
        };
        let cat = |x: &[usize], y: &[usize]| [x, y].concat();
        h(&cat(a, c)) + h(&cat(b, c)) - h(&cat(&cat(a, b), c)) - h(c)
    }

    fn random_joint(rng: &mut Rng) -> JointDistribution {
        let cards = [2 + rng.below(3), 2 + rng.below(3), 2 + rng.below(3)];
        let n = cards.iter().product();
        // sprinkle exact zeros to exercise the 0·log 0 path
        let counts: Vec<f64> = (0..n)
            .map(|_| if rng.uniform() < 0.15 { 0.0 } else { rng.uniform() })
            .collect();
        JointDistribution::from_counts(cards, &counts).unwrap()
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(entropy(&[0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(entropy(&[1.0, 0.0]).unwrap(), 0.0);
        let direct = -(0.25f64 * 0.25f64.log2() + 0.75 * 0.75f64.log2());
        assert!((entropy(&[0.25, 0.75]).unwrap() - direct).abs() < 1e-15);
        assert!((direct - 0.811_278_124_459_132_8).abs() < 1e-15);
        assert!(entropy(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn mi_simple_cases() {
        let indep = JointDistribution::independent();
        assert!(mutual_info(&indep, &[X1], &[Y]).unwrap().abs() < 1e-15);
        let copy = JointDistribution::copy();
        assert!((mutual_info(&copy, &[X1], &[Y]).unwrap() - 1.0).abs() < 1e-15);
        assert!(mutual_info(&copy, &[X1], &[X1, Y]).is_err());
        assert!(mutual_info(&copy, &[], &[Y]).is_err());
    }

    #[test]
    fn conditional_mi_cases() {
        assert!((cond_mutual_info(&JointDistribution::xor(), &[X1], &[Y], &[X2]).unwrap() - 1.0).abs() < 1e-15);
        assert!(cond_mutual_info(&JointDistribution::independent(), &[X1], &[Y], &[X2]).unwrap().abs() < 1e-15);
        assert!(cond_mutual_info(&JointDistribution::copy(), &[X1], &[Y], &[X2]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn pid_of_the_canonical_joints() {
        let xor = pid_decompose(&JointDistribution::xor()).unwrap();
        let near = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(near(xor.unique1, 1.0) && near(xor.unique2, 1.0));
        assert!(near(xor.redundancy, 0.0) && near(xor.total, 1.0));
        assert!(near(xor.synergy, -1.0) && near(xor.interaction_sr, -1.0));
        assert!(near(xor.interaction, 1.0));

        let copy = pid_decompose(&JointDistribution::copy()).unwrap();
        assert!(near(copy.redundancy, 1.0) && near(copy.unique1, 0.0) && near(copy.unique2, 0.0));
        assert!(near(copy.synergy, 0.0) && near(copy.interaction, -1.0) && near(copy.interaction_sr, -1.0));

        let indep = pid_decompose(&JointDistribution::independent()).unwrap();
        for v in [indep.unique1, indep.unique2, indep.redundancy, indep.synergy, indep.total, indep.interaction] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn matches_entropy_oracle_on_random_joints() {
        let mut rng = Rng::new(42);
        for _ in 0..100 {
            let j = random_joint(&mut rng);
            for (a, b, c) in [
                (vec![X1], vec![Y], vec![X2]),
                (vec![X2], vec![Y], vec![X1]),
                (vec![X1, X2], vec![Y], vec![]),
                (vec![X1], vec![X2], vec![]),
            ] {
                let ax = |g: &[Variable]| g.iter().map(|v| v.axis()).collect::<Vec<_>>();
                let want = oracle_cmi(&j, &ax(&a), &ax(&b), &ax(&c));
                let got = cond_mutual_info(&j, &a, &b, &c).unwrap();
                assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn identities_on_random_joints() {
        let mut rng = Rng::new(7);
        for _ in 0..100 {
            let j = random_joint(&mut rng);
            let total = mutual_info(&j, &[X1, X2], &[Y]).unwrap();
            let chain = mutual_info(&j, &[X2], &[Y]).unwrap() + cond_mutual_info(&j, &[X1], &[Y], &[X2]).unwrap();
            assert!((total - chain).abs() < 1e-12);
            let pid = pid_decompose(&j).unwrap();
            assert!((pid.total - (pid.unique1 + pid.unique2 + pid.redundancy + pid.synergy)).abs() < 1e-9);
            assert!((pid.interaction_sr - (pid.synergy - pid.redundancy)).abs() < 1e-9);
            assert!(mutual_info(&j, &[X1], &[X2]).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn factorized_joints_have_zero_mi() {
        let mut rng = Rng::new(8);
        for _ in 0..20 {
            let p1: Vec<f64> = (0..3).map(|_| rng.uniform() + 0.1).collect();
            let p2: Vec<f64> = (0..4).map(|_| rng.uniform() + 0.1).collect();
            let counts: Vec<f64> = p1.iter().flat_map(|a| p2.iter().map(move |b| a * b)).collect();
            let j = JointDistribution::from_counts([3, 1, 4], &counts).unwrap();
            assert!(mutual_info(&j, &[X1], &[Y]).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_mass() {
        assert!(JointDistribution::new([2, 1, 1], vec![0.5, 0.6]).is_err());
        assert!(JointDistribution::new([2, 1, 1], vec![1.2, -0.2]).is_err());
        assert!(JointDistribution::new([2, 1, 1], vec![0.5]).is_err());
        assert!(JointDistribution::new([2, 1, 1], vec![0.5, 0.5 + 1e-10]).is_ok());
    }
}
