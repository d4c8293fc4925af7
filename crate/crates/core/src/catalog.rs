//! Built-in lattice equations.

use alloc::string::ToString;

use crate::eqdsl::TimeKind;
use crate::reduction::Classification;
use crate::{Params, Reality};

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub description: &'static str,
    pub equation: &'static str,
    pub defaults: &'static [(&'static str, f64)],
    pub reality: Reality,
    pub time_kind: TimeKind,
    pub expected: Classification,
    /// Closed-form dispersion relation available in [`crate::oracle`].
    pub omega_oracle: bool,
    /// Closed-form NLS coefficients available in [`crate::oracle`].
    pub nls_oracle: bool,
}

impl CatalogEntry {
    pub fn params(&self) -> Params {
        self.defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

const ENTRIES: &[CatalogEntry] = &[
    CatalogEntry {
        id: "toda-hirota",
        description: "integrable discrete-time Toda lattice",
        equation: "exp(u[0,0] - u[0,1]) - exp(u[0,1] - u[0,2]) = a^2*(exp(u[-1,2] - u[0,1]) - exp(u[0,1] - u[1,0]))",
        defaults: &[("a", 0.5)],
        reality: Reality::RealField,
        time_kind: TimeKind::FullyDiscrete,
        expected: Classification::IntegrableNls,
        omega_oracle: true,
        nls_oracle: true,
    },
    CatalogEntry {
        id: "toda-naive",
        description: "non-integrable leapfrog discretization of the Toda lattice",
        equation: "u[0,1] - 2*u[0,0] + u[0,-1] = a*(exp(u[-1,0] - u[0,0]) - exp(u[0,0] - u[1,0]))",
        defaults: &[("a", 0.5)],
        reality: Reality::RealField,
        time_kind: TimeKind::FullyDiscrete,
        expected: Classification::IntegrableNls,
        omega_oracle: true,
        nls_oracle: true,
    },
    CatalogEntry {
        id: "kdv-sym",
        description: "KdV discretization with a symmetric nonlinear part",
        equation: "u[0,1] - u[0,-1] = a/4*(u[3,0] - 3*u[1,0] + 3*u[-1,0] - u[-3,0]) - b/2*(u[1,0]^2 - u[-1,0]^2)",
        defaults: &[("a", 1.0), ("b", 1.0)],
        reality: Reality::RealField,
        time_kind: TimeKind::FullyDiscrete,
        expected: Classification::IntegrableNls,
        omega_oracle: true,
        nls_oracle: true,
    },
    CatalogEntry {
        id: "kdv-asym",
        description: "KdV discretization with an asymmetric nonlinear part",
        equation: "u[0,1] - u[0,-1] = a/4*(u[3,0] - 3*u[1,0] + 3*u[-1,0] - u[-3,0]) - b/2*(u[1,0]^2 - u[0,0]^2)",
        defaults: &[("a", 1.0), ("b", 1.0)],
        reality: Reality::RealField,
        time_kind: TimeKind::FullyDiscrete,
        expected: Classification::NonIntegrable,
        omega_oracle: true,
        nls_oracle: true,
    },
    CatalogEntry {
        id: "burgers-dd",
        description: "linearizable differential-difference Burgers equation",
        equation: "i*a^2*dt(u[0]) = (1 + a*u[0])*(u[1] - u[0]) + (u[-1] - u[0])/(1 + a*u[-1])",
        defaults: &[("a", 1.0)],
        reality: Reality::ComplexField,
        time_kind: TimeKind::DifferentialDifference,
        expected: Classification::LinearSchrodinger,
        omega_oracle: true,
        nls_oracle: true,
    },
    CatalogEntry {
        id: "burgers-fully-discrete",
        description: "symmetric leapfrog discretization of the Burgers equation",
        equation: "i*a^2/(2*b)*(u[0,1] - u[0,-1]) = (1 + a*u[0,0])*(u[1,0] - u[0,0]) + (u[-1,0] - u[0,0])/(1 + a*u[-1,0])",
        defaults: &[("a", 1.0), ("b", 0.2)],
        reality: Reality::ComplexField,
        time_kind: TimeKind::FullyDiscrete,
        expected: Classification::LinearSchrodinger,
        omega_oracle: true,
        nls_oracle: true,
    },
    CatalogEntry {
        id: "hietarinta",
        description: "linearizable quad equation",
        equation: "(u[0,0] + e2)/(u[0,0] + e1)*(u[1,1] + o2)/(u[1,1] + o1) = (u[1,0] + e2)/(u[1,0] + o1)*(u[0,1] + o2)/(u[0,1] + e1)",
        defaults: &[("e1", 0.25), ("e2", 1.0), ("o1", 0.5), ("o2", 0.2)],
        reality: Reality::RealField,
        time_kind: TimeKind::FullyDiscrete,
        expected: Classification::LinearSchrodinger,
        omega_oracle: true,
        nls_oracle: true,
    },
];

pub fn catalog() -> &'static [CatalogEntry] {
    ENTRIES
}

pub fn lookup(id: &str) -> Option<&'static CatalogEntry> {
    ENTRIES.iter().find(|e| e.id == id)
}
