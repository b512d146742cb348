//! Finite partitioning abstract domains and the named domain library.

mod uco;

pub use uco::*;

use std::sync::Arc;

pub const DEFAULT_BOUND: i64 = 4;

/// Names of the library domains that apply to integers, coarsest first.
pub const INT_DOMAINS: [&str; 6] = ["top", "zero", "par", "sign", "parsign", "id"];
/// Names of the library domains that apply to references, coarsest first.
pub const REF_DOMAINS: [&str; 5] = ["top", "null", "cyc", "nullcyc", "id"];

/// The named domains, built once for an identity bound.
#[derive(Debug, Clone)]
pub struct Library {
    bound: i64,
    domains: Vec<Arc<Uco>>,
}

impl Library {
    pub fn new(bound: i64) -> Library {
        let par = Uco::par_domain();
        let sign = Uco::sign_domain();
        let parsign = Uco::reduced_product(&par, &sign, "parsign").expect("par and sign are numeric");
        let null = Uco::null_domain();
        let cyc = Uco::cyc_domain();
        let nullcyc = Uco::reduced_product(&cyc, &null, "nullcyc").expect("null and cyc are reference domains");
        let domains = vec![
            Uco::id_domain(bound),
            Uco::top_domain(),
            par,
            sign,
            parsign,
            Uco::zero_domain(),
            null,
            cyc,
            nullcyc,
        ];
        Library { bound, domains: domains.into_iter().map(Arc::new).collect() }
    }

    pub fn bound(&self) -> i64 {
        self.bound
    }

    pub fn get(&self, name: &str) -> Result<Arc<Uco>, DomainError> {
        self.domains
            .iter()
            .find(|d| d.name() == name)
            .cloned()
            .ok_or_else(|| DomainError::Unknown(name.to_string()))
    }

    pub fn id(&self) -> Arc<Uco> {
        self.get("id").unwrap()
    }

    pub fn top(&self) -> Arc<Uco> {
        self.get("top").unwrap()
    }

    pub fn names(&self) -> Vec<&str> {
        self.domains.iter().map(|d| d.name()).collect()
    }

    /// Library domains applicable to a variable of the given kind, coarsest first.
    pub fn for_type(&self, is_ref: bool) -> Vec<Arc<Uco>> {
        let names: &[&str] = if is_ref { &REF_DOMAINS } else { &INT_DOMAINS };
        names.iter().map(|n| self.get(n).unwrap()).collect()
    }
}

impl Default for Library {
    fn default() -> Self {
        Library::new(DEFAULT_BOUND)
    }
}
