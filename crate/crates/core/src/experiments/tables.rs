//! Scenario presets for the three published simulation tables, with the
//! reported cells kept for side-by-side output.

use serde::{Deserialize, Serialize};

use super::{Grouping, Link, NoiseLaw, ScenarioConfig, SigmaPolicy, Truth};
use crate::hyperopt::XiSearchSpace;
use crate::inference::SamplerConfig;
use crate::models::PriorFamily;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportedCells {
    pub waic1: f64,
    pub piic1: f64,
    pub rate1: [usize; 3],
    pub waic2: f64,
    pub piic2: f64,
    pub rate2: [usize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub table: u8,
    pub n: usize,
    pub p: usize,
    pub theta_pattern: [f64; 3],
    pub truth: Truth,
    pub prior_family: PriorFamily,
    pub reported: ReportedCells,
}

/// Settings shared by every row when turning a preset into a runnable scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub replications: usize,
    pub risk_draws: usize,
    pub risk_posterior_draws: Option<usize>,
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub search: XiSearchSpace,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            replications: 100,
            risk_draws: 10_000,
            risk_posterior_draws: None,
            seed: 0,
            sampler: SamplerConfig::default(),
            search: XiSearchSpace::default(),
        }
    }
}

impl TableRow {
    pub fn label(&self) -> String {
        let truth = match self.truth {
            Truth::Linear { noise: NoiseLaw::Normal { variance } } => format!("N(0,{variance})"),
            Truth::Linear { noise: NoiseLaw::StudentT { dof } } => format!("t({dof})"),
            Truth::Binomial { m, link } => format!("m={m} {}", if link == Link::Logit { "logit" } else { "probit" }),
        };
        let [a, b, c] = self.theta_pattern;
        format!("table{} n={} p={} theta=({a},{b},{c}) {truth}", self.table, self.n, self.p)
    }

    pub fn scenario(&self, settings: &RunSettings) -> ScenarioConfig {
        ScenarioConfig {
            n: self.n,
            p: self.p,
            theta_pattern: self.theta_pattern,
            truth: self.truth,
            prior_family: self.prior_family,
            groupings: vec![Grouping::One, Grouping::Three],
            replications: settings.replications,
            risk_draws: settings.risk_draws,
            risk_posterior_draws: settings.risk_posterior_draws,
            seed: settings.seed,
            sampler: settings.sampler.clone(),
            search: settings.search.clone(),
            sigma2: SigmaPolicy::Auto,
        }
    }
}

fn normal(variance: f64) -> Truth {
    Truth::Linear { noise: NoiseLaw::Normal { variance } }
}

fn t(dof: f64) -> Truth {
    Truth::Linear { noise: NoiseLaw::StudentT { dof } }
}

fn binom(m: u32, link: Link) -> Truth {
    Truth::Binomial { m, link }
}

type Cells = (f64, f64, [usize; 3], f64, f64, [usize; 3]);

fn row(table: u8, family: PriorFamily, n: usize, p: usize, theta: [f64; 3], truth: Truth, c: Cells) -> TableRow {
    TableRow {
        table,
        n,
        p,
        theta_pattern: theta,
        truth,
        prior_family: family,
        reported: ReportedCells { waic1: c.0, piic1: c.1, rate1: c.2, waic2: c.3, piic2: c.4, rate2: c.5 },
    }
}

/// Normal prior, linear regression.
pub fn table1() -> Vec<TableRow> {
    let r = |n, p, th, tr, c| row(1, PriorFamily::Normal, n, p, th, tr, c);
    let e = [2.0, 2.0, 2.0];
    vec![
        r(12, 6, e, normal(0.5), (0.458, 0.458, [46, 16, 38], 0.386, 0.382, [42, 3, 55])),
        r(12, 6, e, normal(1.0), (0.456, 0.456, [48, 4, 48], 0.484, 0.460, [31, 1, 68])),
        r(12, 6, e, normal(2.0), (0.457, 0.455, [46, 3, 51], 0.590, 0.465, [5, 0, 95])),
        r(12, 6, e, t(5.0), (0.818, 0.814, [41, 8, 51], 0.923, 0.828, [14, 1, 85])),
        r(12, 6, e, t(2.0), (3.571, 3.558, [31, 20, 49], 3.689, 3.591, [17, 8, 75])),
        r(12, 6, [3.0, 2.0, 1.0], normal(1.0), (0.459, 0.457, [41, 14, 45], 0.477, 0.463, [43, 1, 56])),
        r(12, 6, [3.0, 1.0, -1.0], normal(1.0), (0.462, 0.460, [41, 13, 46], 0.475, 0.464, [43, 1, 56])),
        r(12, 9, e, normal(1.0), (0.515, 0.513, [45, 9, 46], 0.622, 0.525, [25, 2, 73])),
        r(18, 9, e, normal(1.0), (0.518, 0.524, [59, 0, 41], 0.546, 0.524, [37, 0, 63])),
        r(18, 12, e, normal(0.5), (0.505, 0.507, [55, 5, 40], 0.459, 0.454, [46, 0, 54])),
        r(18, 12, e, normal(1.0), (0.495, 0.495, [50, 4, 46], 0.535, 0.497, [33, 0, 67])),
        r(18, 12, e, normal(2.0), (0.489, 0.487, [46, 3, 51], 0.616, 0.496, [11, 0, 89])),
        r(18, 12, e, t(5.0), (0.753, 0.764, [56, 4, 40], 0.814, 0.764, [31, 0, 69])),
        r(18, 12, e, t(2.0), (4.159, 4.117, [45, 21, 34], 4.323, 4.195, [23, 8, 69])),
        r(18, 12, [3.0, 2.0, 1.0], normal(1.0), (0.509, 0.505, [48, 7, 45], 0.522, 0.507, [41, 0, 59])),
        r(18, 12, [3.0, 1.0, -1.0], normal(1.0), (0.509, 0.500, [24, 41, 35], 0.524, 0.501, [36, 4, 60])),
        r(18, 15, e, normal(1.0), (0.447, 0.433, [43, 9, 48], 0.526, 0.441, [20, 1, 79])),
        r(24, 15, e, normal(1.0), (0.454, 0.464, [53, 1, 46], 0.478, 0.464, [39, 1, 60])),
        r(24, 18, e, normal(0.5), (0.534, 0.540, [57, 3, 40], 0.510, 0.505, [47, 0, 53])),
        r(24, 18, e, normal(1.0), (0.519, 0.531, [56, 2, 42], 0.572, 0.532, [36, 0, 64])),
        r(24, 18, e, normal(2.0), (0.501, 0.514, [52, 2, 46], 0.639, 0.515, [13, 0, 87])),
        r(24, 18, e, t(5.0), (0.812, 0.822, [51, 7, 42], 0.878, 0.827, [36, 2, 62])),
        r(24, 18, e, t(2.0), (3.021, 3.032, [46, 20, 34], 3.160, 3.045, [28, 4, 68])),
        r(24, 18, [3.0, 2.0, 1.0], normal(1.0), (0.543, 0.528, [40, 14, 46], 0.563, 0.534, [35, 0, 65])),
        r(24, 18, [3.0, 1.0, -1.0], normal(1.0), (0.559, 0.543, [18, 41, 41], 0.585, 0.543, [34, 6, 60])),
    ]
}

/// Laplace prior, linear regression.
pub fn table2() -> Vec<TableRow> {
    let r = |n, p, th, tr, c| row(2, PriorFamily::Laplace, n, p, th, tr, c);
    let a = [3.0, 2.0, 1.0];
    let b = [4.0, 2.0, 0.0];
    let c = [4.0, 0.0, -2.0];
    let d = [3.0, 1.0, -1.0];
    vec![
        r(18, 12, a, normal(0.5), (1.715, 1.636, [31, 15, 54], 2.040, 1.603, [36, 0, 64])),
        r(18, 12, a, normal(1.0), (1.816, 1.753, [28, 13, 59], 2.175, 1.600, [36, 0, 64])),
        r(18, 12, a, normal(2.0), (1.788, 1.748, [25, 17, 58], 2.669, 1.610, [14, 0, 86])),
        r(18, 12, a, t(2.0), (6.138, 4.982, [16, 8, 76], 6.235, 4.921, [16, 0, 84])),
        r(18, 12, b, normal(1.0), (1.631, 1.613, [22, 26, 52], 1.532, 1.447, [47, 0, 53])),
        r(18, 12, c, normal(1.0), (1.767, 1.810, [26, 56, 18], 1.536, 1.764, [64, 0, 36])),
        r(18, 12, d, normal(1.0), (2.108, 2.174, [20, 61, 19], 2.137, 2.194, [54, 0, 46])),
        r(18, 15, a, normal(1.0), (2.742, 2.694, [24, 20, 46], 4.029, 2.630, [35, 0, 65])),
        r(24, 12, a, normal(1.0), (1.365, 1.338, [30, 20, 50], 1.513, 1.243, [29, 0, 71])),
        r(24, 15, a, normal(0.5), (1.464, 1.383, [25, 9, 66], 1.753, 1.359, [21, 0, 79])),
        r(24, 15, a, normal(1.0), (1.637, 1.588, [21, 15, 64], 1.880, 1.378, [25, 0, 75])),
        r(24, 15, a, normal(2.0), (1.503, 1.482, [18, 25, 57], 2.342, 1.332, [5, 0, 95])),
        r(24, 15, a, t(2.0), (5.920, 5.096, [12, 15, 73], 6.422, 5.047, [20, 0, 80])),
        r(24, 15, b, normal(1.0), (1.436, 1.317, [15, 24, 61], 1.554, 1.226, [33, 0, 67])),
        r(24, 15, c, normal(1.0), (1.699, 1.584, [17, 62, 21], 1.590, 1.504, [58, 0, 42])),
        r(24, 15, d, normal(1.0), (2.135, 2.103, [29, 54, 17], 1.984, 1.932, [57, 0, 43])),
        r(24, 18, a, normal(1.0), (2.222, 2.016, [20, 23, 57], 2.896, 1.924, [26, 0, 74])),
        r(30, 15, a, normal(1.0), (1.201, 1.099, [23, 16, 61], 1.344, 1.048, [26, 0, 74])),
        r(30, 18, a, normal(0.5), (1.273, 1.255, [38, 19, 43], 1.653, 1.258, [30, 0, 70])),
        r(30, 18, a, normal(1.0), (1.327, 1.288, [30, 28, 42], 1.631, 1.217, [30, 0, 70])),
        r(30, 18, a, normal(2.0), (1.411, 1.362, [22, 35, 43], 1.822, 1.332, [19, 0, 81])),
        r(30, 18, a, t(2.0), (4.645, 3.942, [15, 6, 79], 5.514, 4.030, [6, 0, 94])),
        r(30, 18, b, normal(1.0), (1.276, 1.271, [19, 41, 40], 1.397, 1.119, [31, 0, 69])),
        r(30, 18, c, normal(1.0), (1.480, 1.373, [18, 49, 33], 1.460, 1.323, [47, 0, 53])),
        r(30, 18, d, normal(1.0), (1.915, 1.822, [18, 34, 48], 1.843, 1.754, [48, 0, 52])),
    ]
}

/// Laplace prior, logistic regression.
pub fn table3() -> Vec<TableRow> {
    let r = |n, p, th, tr, c| row(3, PriorFamily::Laplace, n, p, th, tr, c);
    let a = [3.0, 2.0, 1.0];
    let b = [4.0, 2.0, 0.0];
    let c = [4.0, 0.0, -2.0];
    let (lg, pb) = (Link::Logit, Link::Probit);
    vec![
        r(20, 6, a, binom(5, lg), (1.540, 1.455, [21, 36, 38], 1.529, 1.459, [33, 0, 62])),
        r(20, 6, a, binom(10, lg), (2.619, 2.484, [22, 10, 68], 3.030, 2.509, [26, 0, 74])),
        r(20, 6, a, binom(15, lg), (3.893, 3.745, [21, 4, 73], 3.976, 3.754, [22, 0, 76])),
        r(20, 6, b, binom(10, lg), (2.138, 2.092, [30, 35, 34], 2.121, 2.093, [44, 0, 55])),
        r(20, 6, c, binom(10, lg), (2.409, 2.290, [18, 42, 39], 2.320, 2.293, [46, 0, 53])),
        r(20, 6, a, binom(10, pb), (4.624, 4.068, [5, 0, 95], 4.548, 4.063, [6, 0, 94])),
        r(20, 9, a, binom(10, lg), (2.553, 2.481, [17, 41, 36], 2.480, 2.440, [36, 0, 58])),
        r(20, 9, a, binom(10, pb), (4.820, 4.171, [8, 1, 88], 4.802, 4.167, [6, 0, 91])),
        r(30, 6, a, binom(10, lg), (2.432, 2.380, [23, 25, 52], 2.410, 2.388, [42, 0, 58])),
        r(30, 6, a, binom(10, pb), (4.553, 4.119, [7, 0, 93], 4.497, 4.131, [12, 0, 88])),
        r(30, 9, a, binom(5, lg), (1.410, 1.292, [16, 29, 45], 1.309, 1.273, [39, 0, 51])),
        r(30, 9, a, binom(10, lg), (2.124, 2.097, [25, 27, 44], 2.116, 2.096, [44, 0, 52])),
        r(30, 9, a, binom(15, lg), (3.264, 3.087, [9, 5, 85], 3.790, 3.100, [11, 0, 88])),
        r(30, 9, b, binom(10, lg), (1.924, 1.833, [12, 29, 53], 1.902, 1.835, [32, 0, 62])),
        r(30, 9, c, binom(10, lg), (2.096, 2.010, [15, 33, 51], 2.037, 1.998, [48, 0, 51])),
        r(30, 9, a, binom(10, pb), (4.725, 4.160, [6, 0, 94], 4.768, 4.166, [3, 0, 97])),
        r(30, 12, a, binom(10, lg), (2.082, 1.976, [13, 36, 43], 2.018, 1.963, [34, 0, 58])),
        r(30, 12, a, binom(10, pb), (4.534, 3.944, [5, 0, 95], 4.594, 3.934, [5, 0, 95])),
        r(40, 9, a, binom(10, lg), (2.163, 2.038, [17, 1, 82], 2.304, 2.072, [24, 0, 76])),
        r(40, 9, a, binom(10, pb), (4.542, 4.061, [7, 0, 93], 4.533, 4.067, [6, 0, 94])),
        r(40, 12, a, binom(5, lg), (1.246, 1.175, [15, 26, 39], 1.206, 1.174, [40, 0, 40])),
        r(40, 12, a, binom(10, lg), (2.018, 1.950, [29, 23, 45], 1.995, 1.956, [40, 0, 57])),
        r(40, 12, a, binom(15, lg), (2.831, 2.750, [14, 26, 59], 2.799, 2.742, [31, 0, 68])),
        r(40, 12, b, binom(10, lg), (1.692, 1.625, [22, 32, 43], 1.636, 1.601, [42, 0, 55])),
        r(40, 12, c, binom(10, lg), (1.752, 1.676, [11, 30, 51], 1.722, 1.658, [29, 0, 63])),
        r(40, 12, a, binom(10, pb), (4.594, 3.985, [2, 0, 98], 4.568, 4.007, [4, 0, 96])),
    ]
}

pub fn table(k: u8) -> Option<Vec<TableRow>> {
    match k {
        1 => Some(table1()),
        2 => Some(table2()),
        3 => Some(table3()),
        _ => None,
    }
}
