// SPDX-License-Identifier: Apache-2.0

//! Lists `(E, p, D, c, chi)` that satisfy the hypotheses, with their L-values
//! and the smallest twist point.
//!
//! `cargo run --release --example scan_configs -- [max_D] [search_bound]`

use shpoints::curve::{check_sh_hypothesis, complex_l_derivative, complex_l_value, naive_point_search, EllipticCurveData};
use shpoints::darmon::chi_delta1_minus_m;
use shpoints::genus::{attach_genus_pairs, enumerate_quadratic_chars, order_genus_pairs};
use shpoints::quadforms::{is_fundamental, narrow_class_group};

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let max_d = args.first().copied().unwrap_or(120) as i64;
    let bound = args.get(1).copied().unwrap_or(300);
    let curves = [("11a1", 11u64), ("14a1", 7), ("15a1", 5), ("21a1", 7), ("33a1", 11), ("35a1", 5), ("35a1", 7), ("55a1", 5), ("65a1", 5), ("77a1", 7), ("91a1", 7), ("91b1", 7)];
    for (label, p) in curves {
        let Ok(e) = EllipticCurveData::from_label(label, p) else { continue };
        for d in 2..=max_d {
            if !is_fundamental(d) {
                continue;
            }
            for c in [1u64, 3, 5, 7, 11, 13] {
                if !check_sh_hypothesis(&e, d, c).pass {
                    continue;
                }
                let Ok(g) = narrow_class_group(d, c) else { continue };
                let mut chars = enumerate_quadratic_chars(&g);
                if attach_genus_pairs(&g, &mut chars, e.n).is_err() || order_genus_pairs(&mut chars, e.n, e.w_n()).is_err() {
                    println!("{label} p={p} D={d} c={c}: genus failure");
                    continue;
                }
                for chi in chars.iter().filter(|c| c.primitive) {
                    let (d1, d2) = chi.pair().unwrap();
                    let hyp = chi_delta1_minus_m(&g, chi, e.m) == -e.w_m();
                    if !hyp {
                        continue;
                    }
                    let lp = complex_l_derivative(&e, d1, 3.0).map(|l| l.value).unwrap_or(f64::NAN);
                    let lv = complex_l_value(&e, d2, 3.0).map(|l| l.value).unwrap_or(f64::NAN);
                    let pts = if (lp * lv).abs() > 1e-4 { naive_point_search(&e.a, d1, bound).len() } else { 0 };
                    println!("{label} p={p} D={d} c={c} h={} pair=({d1},{d2}) L'={lp:.6} L={lv:.6} points={pts}", g.order());
                }
            }
        }
    }
}
