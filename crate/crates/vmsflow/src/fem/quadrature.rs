//! Fixed symmetric quadrature rules on the reference triangle
//! {x, y ≥ 0, x + y ≤ 1} and a Gauss rule on [0, 1] for boundary edges.
//!
//! Each form uses a rule one degree above its exactness need. Points are
//! (x, y, weight) with weights summing to the reference area 1/2.

/// Degree 2, 3 points.
pub const RULE_DEG2: [(f64, f64, f64); 3] = [
    (1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0),
    (2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0),
    (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0),
];

const D4_A: f64 = 0.445948490915965;
const D4_WA: f64 = 0.223381589678011 * 0.5;
const D4_B: f64 = 0.091576213509771;
const D4_WB: f64 = 0.109951743655322 * 0.5;

/// Degree 4, 6 points.
pub const RULE_DEG4: [(f64, f64, f64); 6] = [
    (D4_A, D4_A, D4_WA),
    (1.0 - 2.0 * D4_A, D4_A, D4_WA),
    (D4_A, 1.0 - 2.0 * D4_A, D4_WA),
    (D4_B, D4_B, D4_WB),
    (1.0 - 2.0 * D4_B, D4_B, D4_WB),
    (D4_B, 1.0 - 2.0 * D4_B, D4_WB),
];

const D5_A: f64 = 0.470142064105115;
const D5_WA: f64 = 0.132394152788506 * 0.5;
const D5_B: f64 = 0.101286507323456;
const D5_WB: f64 = 0.125939180544827 * 0.5;

/// Degree 5, 7 points.
pub const RULE_DEG5: [(f64, f64, f64); 7] = [
    (1.0 / 3.0, 1.0 / 3.0, 0.225 * 0.5),
    (D5_A, D5_A, D5_WA),
    (1.0 - 2.0 * D5_A, D5_A, D5_WA),
    (D5_A, 1.0 - 2.0 * D5_A, D5_WA),
    (D5_B, D5_B, D5_WB),
    (1.0 - 2.0 * D5_B, D5_B, D5_WB),
    (D5_B, 1.0 - 2.0 * D5_B, D5_WB),
];

const D6_A: f64 = 0.063089014491502;
const D6_WA: f64 = 0.050844906370207 * 0.5;
const D6_B: f64 = 0.249286745170910;
const D6_WB: f64 = 0.116786275726379 * 0.5;
const D6_C: f64 = 0.310352451033785;
const D6_D: f64 = 0.053145049844816;
const D6_E: f64 = 1.0 - D6_C - D6_D;
const D6_WC: f64 = 0.082851075618374 * 0.5;

/// Degree 6, 12 points.
pub const RULE_DEG6: [(f64, f64, f64); 12] = [
    (D6_A, D6_A, D6_WA),
    (1.0 - 2.0 * D6_A, D6_A, D6_WA),
    (D6_A, 1.0 - 2.0 * D6_A, D6_WA),
    (D6_B, D6_B, D6_WB),
    (1.0 - 2.0 * D6_B, D6_B, D6_WB),
    (D6_B, 1.0 - 2.0 * D6_B, D6_WB),
    // All six permutations of the asymmetric barycentric triple (e, c, d),
    // written as reference coordinates (λ₁, λ₂).
    (D6_C, D6_D, D6_WC),
    (D6_D, D6_C, D6_WC),
    (D6_C, D6_E, D6_WC),
    (D6_E, D6_C, D6_WC),
    (D6_D, D6_E, D6_WC),
    (D6_E, D6_D, D6_WC),
];

/// Smallest shipped rule exact for polynomials of the given total degree.
pub fn tri_rule(degree: usize) -> &'static [(f64, f64, f64)] {
    match degree {
        0..=2 => &RULE_DEG2,
        3..=4 => &RULE_DEG4,
        5 => &RULE_DEG5,
        6 => &RULE_DEG6,
        d => panic!("no {d}-exact triangle rule is shipped"),
    }
}

const EDGE_T: f64 = 0.387_298_334_620_741_7; // √15 / 10

/// 3-point Gauss on [0, 1] (degree 5); weights sum to 1.
pub const EDGE_RULE: [(f64, f64); 3] = [
    (0.5 - EDGE_T, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.5 + EDGE_T, 5.0 / 18.0),
];
