//! Static table of the available checks.

#[derive(Debug, Clone, Copy)]
pub struct CheckInfo {
    pub name: &'static str,
    /// Core module providing the operation.
    pub module: &'static str,
    pub description: &'static str,
    /// The property being checked, in formula form.
    pub anchor: &'static str,
    pub default_tolerance: f64,
    pub needs_linear_feedback: bool,
}

const fn check(
    name: &'static str,
    module: &'static str,
    description: &'static str,
    anchor: &'static str,
    default_tolerance: f64,
) -> CheckInfo {
    CheckInfo {
        name,
        module,
        description,
        anchor,
        default_tolerance,
        needs_linear_feedback: false,
    }
}

const fn linear(info: CheckInfo) -> CheckInfo {
    CheckInfo {
        needs_linear_feedback: true,
        ..info
    }
}

pub static CHECKS: &[CheckInfo] = &[
    check(
        "flow_estimates",
        "controlled_flow",
        "sampled sup-norm and Lipschitz constant of the flow against the Gronwall bounds",
        "|Φ| ≤ (R + mT)e^{mT}, Lip(Φ) ≤ e^{ℓT}·max(1, m(1 + M_R))",
        1e-12,
    ),
    check(
        "flow_inverse",
        "controlled_flow",
        "forward then backward flow returns every grid node",
        "Φ_(t,τ) ∘ Φ_(τ,t) = id",
        1e-8,
    ),
    check(
        "continuity",
        "controlled_flow",
        "flow discrepancy shrinks with the control distance along a pulse sequence",
        "d_𝒰(u, v_k) → 0 ⇒ Φ^{v_k} → Φ^u",
        1e-12,
    ),
    check(
        "semigroup",
        "koopman",
        "Koopman set over [τ,t] against the composition through s, splice-closed family",
        "𝒦_(τ,t) = 𝒦_(τ,s) ∘ 𝒦_(s,t)",
        1e-2,
    ),
    check(
        "homogeneity",
        "koopman",
        "Koopman set of α·φ against α times the Koopman set of φ",
        "𝒦(αφ) = α𝒦(φ)",
        1e-12,
    ),
    check(
        "subadditivity",
        "koopman",
        "Koopman set of φ₁ + φ₂ inside the Minkowski sum",
        "𝒦(φ₁ + φ₂) ⊂ 𝒦(φ₁) + 𝒦(φ₂)",
        1e-12,
    ),
    check(
        "lipschitz",
        "koopman",
        "one-sided defect between Koopman sets bounded by the observable distance",
        "dist(𝒦(φ₁), 𝒦(φ₂)) ≤ ‖φ₁ − φ₂‖",
        1e-12,
    ),
    check(
        "generator_koopman",
        "liouville",
        "difference quotients of the Koopman sets converge to the Liouville set at order one",
        "(𝒦_(τ,τ+h)(φ) − φ)/h → L(φ) = {∇φ·f_u}",
        0.2,
    ),
    check(
        "transport",
        "liouville",
        "characteristic solution satisfies the Koopman differential inclusion with the generating control",
        "∂_τψ + ∇ψ·f_{u(τ)} = 0",
        1e-2,
    ),
    check(
        "duality",
        "perron_frobenius",
        "pairing of the pushed measure equals pairing with the pulled observable",
        "⟨Φ#μ, φ⟩ = ⟨μ, φ∘Φ⟩",
        1e-12,
    ),
    check(
        "perron_generator",
        "perron_frobenius",
        "Perron-Frobenius difference quotients approach the divergence pairing, halving with h",
        "(P_(τ,τ+h)μ − μ)/h → −div(f_u μ)",
        0.15,
    ),
    check(
        "adjoint",
        "perron_frobenius",
        "pairings of the Perron set bounded by the support function of the Koopman set",
        "Re⟨ν, φ⟩ ≤ max_{ψ∈𝒦(φ)} Re⟨μ, ψ⟩ for ν ∈ co 𝒫(μ)",
        1e-9,
    ),
    linear(check(
        "spectral_mapping",
        "spectral",
        "linear eigenfunctions of each closed loop and their exponential mapping under the flow",
        "λφ_λ ∈ L(φ_λ) ⇒ e^{λ(t−τ)}φ_λ ∈ 𝒦_(τ,t)(φ_λ)",
        1e-6,
    )),
    linear(check(
        "eigen_products",
        "spectral",
        "products and powers of eigenfunctions of one closed loop are eigenfunctions",
        "φ₁^{α₁}φ₂^{α₂} has eigenvalue α₁λ₁ + α₂λ₂",
        1e-8,
    )),
    linear(check(
        "converse_spectral",
        "spectral",
        "eigenvalue recovered from Koopman members proportional to the eigenfunction",
        "(ρ(h) − 1)/h → λ",
        5e-2,
    )),
];

pub fn find(name: &str) -> Option<&'static CheckInfo> {
    CHECKS.iter().find(|c| c.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_tolerances_positive() {
        for (i, a) in CHECKS.iter().enumerate() {
            assert!(a.default_tolerance > 0.0);
            assert!(CHECKS[i + 1..].iter().all(|b| b.name != a.name));
        }
        assert!(find("semigroup").is_some());
        assert!(find("missing").is_none());
    }
}
