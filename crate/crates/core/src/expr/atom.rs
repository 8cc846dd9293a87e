use std::collections::HashSet;
use std::fmt;
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;

/// The four kinds of symbol an [`Expression`](super::Expression) is built from.
///
/// Variant order fixes the canonical atom order: independent variables first,
/// then jet variables by `(symbol, order)`, then function atoms by
/// `(name, multi-index)`, then parameters.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AtomKind {
    Independent(String),
    Jet {
        symbol: String,
        order: u32,
    },
    Function {
        name: String,
        derivative: Vec<u32>,
        args: Vec<String>,
    },
    Parameter(String),
}

static INTERNER: Lazy<Mutex<HashSet<Arc<AtomKind>>>> = Lazy::new(|| Mutex::new(HashSet::new()));

/// Interned atom. Equal atoms share storage, so clones and comparisons are cheap.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom(Arc<AtomKind>);

impl Atom {
    pub fn new(kind: AtomKind) -> Atom {
        if let AtomKind::Function {
            derivative, args, ..
        } = &kind
        {
            assert_eq!(
                derivative.len(),
                args.len(),
                "multi-index length must match the argument count"
            );
        }
        let mut set = INTERNER.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(existing) = set.get(&kind) {
            return Atom(existing.clone());
        }
        let arc = Arc::new(kind);
        set.insert(arc.clone());
        Atom(arc)
    }

    pub fn independent(name: &str) -> Atom {
        Atom::new(AtomKind::Independent(name.to_string()))
    }

    pub fn jet(symbol: &str, order: u32) -> Atom {
        Atom::new(AtomKind::Jet {
            symbol: symbol.to_string(),
            order,
        })
    }

    pub fn parameter(name: &str) -> Atom {
        Atom::new(AtomKind::Parameter(name.to_string()))
    }

    /// One-variable function atom `name^(order)(arg)`.
    pub fn function1(name: &str, arg: &str, order: u32) -> Atom {
        Atom::new(AtomKind::Function {
            name: name.to_string(),
            derivative: vec![order],
            args: vec![arg.to_string()],
        })
    }

    pub fn function<S: AsRef<str>>(name: &str, args: &[S], derivative: &[u32]) -> Atom {
        Atom::new(AtomKind::Function {
            name: name.to_string(),
            derivative: derivative.to_vec(),
            args: args.iter().map(|s| s.as_ref().to_string()).collect(),
        })
    }

    pub fn kind(&self) -> &AtomKind {
        &self.0
    }

    pub fn is_function(&self) -> bool {
        matches!(*self.0, AtomKind::Function { .. })
    }

    pub fn is_jet(&self) -> bool {
        matches!(*self.0, AtomKind::Jet { .. })
    }

    /// `(symbol, order)` for jet atoms.
    pub fn as_jet(&self) -> Option<(&str, u32)> {
        match &*self.0 {
            AtomKind::Jet { symbol, order } => Some((symbol, *order)),
            _ => None,
        }
    }

    /// `(name, args, multi-index)` for function atoms.
    pub fn as_function(&self) -> Option<(&str, &[String], &[u32])> {
        match &*self.0 {
            AtomKind::Function {
                name,
                derivative,
                args,
            } => Some((name, args, derivative)),
            _ => None,
        }
    }

    /// Same function with the derivative index of argument `slot` raised by one.
    pub fn function_raised(&self, slot: usize) -> Option<Atom> {
        let (name, args, index) = self.as_function()?;
        let mut index = index.to_vec();
        *index.get_mut(slot)? += 1;
        Some(Atom::function(name, args, &index))
    }

    /// Total derivative order of a function atom.
    pub fn function_order(&self) -> Option<u32> {
        self.as_function().map(|(_, _, d)| d.iter().sum())
    }

    /// True if `self` and `other` are the same function (name and arguments) with
    /// possibly different derivative indices.
    pub fn same_function(&self, other: &Atom) -> bool {
        match (self.as_function(), other.as_function()) {
            (Some((n1, a1, _)), Some((n2, a2, _))) => n1 == n2 && a1 == a2,
            _ => false,
        }
    }

    /// Name used when this atom appears as an argument of a function atom.
    pub fn coordinate_name(&self) -> Option<&str> {
        match &*self.0 {
            AtomKind::Independent(n) => Some(n),
            AtomKind::Jet { symbol, order: 0 } => Some(symbol),
            _ => None,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            AtomKind::Independent(n) | AtomKind::Parameter(n) => write!(f, "{n}"),
            AtomKind::Jet { symbol, order: 0 } => write!(f, "{symbol}"),
            AtomKind::Jet { symbol, order } => write!(f, "{symbol}#{order}"),
            AtomKind::Function {
                name,
                derivative,
                args,
            } => {
                let args = args.join(",");
                if derivative.len() == 1 {
                    match derivative[0] {
                        0 => write!(f, "{name}({args})"),
                        k @ 1..=3 => write!(f, "{name}{}({args})", "'".repeat(k as usize)),
                        k => write!(f, "D({name}({args}),{k})"),
                    }
                } else if derivative.iter().all(|&d| d == 0) {
                    write!(f, "{name}({args})")
                } else {
                    let idx: Vec<String> = derivative.iter().map(|d| d.to_string()).collect();
                    write!(f, "D({name}({args}),{})", idx.join(","))
                }
            }
        }
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_shares_storage() {
        let a = Atom::jet("y", 2);
        let b = Atom::jet("y", 2);
        assert!(Arc::ptr_eq(&a.0, &b.0));
        assert_ne!(a, Atom::jet("y", 3));
    }

    #[test]
    fn canonical_kind_order() {
        let x = Atom::independent("x");
        let y = Atom::jet("y", 0);
        let f = Atom::function1("f", "x", 0);
        let k = Atom::parameter("k1");
        assert!(x < y && y < f && f < k);
        assert!(Atom::jet("a1", 5) < Atom::jet("y", 0));
        assert!(Atom::function1("f", "x", 1) < Atom::function1("f", "x", 2));
    }

    #[test]
    fn display_forms() {
        assert_eq!(Atom::function1("f", "x", 2).to_string(), "f''(x)");
        assert_eq!(Atom::function1("f", "x", 4).to_string(), "D(f(x),4)");
        assert_eq!(Atom::jet("y", 3).to_string(), "y#3");
        assert_eq!(
            Atom::function("phi4", &["x", "y"], &[0, 1]).to_string(),
            "D(phi4(x,y),0,1)"
        );
    }

    #[test]
    #[should_panic]
    fn multi_index_length_checked() {
        Atom::function("F", &["x", "y"], &[1]);
    }
}
