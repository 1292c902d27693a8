// SPDX-License-Identifier: Apache-2.0

//! Darmon (Stark–Heegner) points of conductor `c` over real quadratic fields,
//! twisted by quadratic ring class characters, together with the numerical
//! checks that tie them to `L`-values.

pub mod curve;
pub mod darmon;
pub mod genus;
pub mod mklfun;
pub mod modsym;
pub mod oms;
pub mod padic;
pub mod par;
pub mod pipeline;
pub mod quadforms;
