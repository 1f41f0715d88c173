//! Periodic-table data: symbols, atomic numbers, and the allowed-valence model.

use serde::{Deserialize, Serialize};

/// Chemical element, stored by atomic number.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct Element(pub u8);

/// Symbols indexed by atomic number - 1.
const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn",
    "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
];

impl Element {
    pub const HYDROGEN: Element = Element(1);
    pub const BORON: Element = Element(5);
    pub const CARBON: Element = Element(6);
    pub const NITROGEN: Element = Element(7);
    pub const OXYGEN: Element = Element(8);
    pub const FLUORINE: Element = Element(9);
    pub const PHOSPHORUS: Element = Element(15);
    pub const SULFUR: Element = Element(16);
    pub const CHLORINE: Element = Element(17);
    pub const BROMINE: Element = Element(35);
    pub const IODINE: Element = Element(53);

    pub fn from_symbol(sym: &str) -> Option<Element> {
        SYMBOLS
            .iter()
            .position(|s| *s == sym)
            .map(|i| Element(i as u8 + 1))
    }

    pub fn symbol(&self) -> &'static str {
        SYMBOLS[self.0 as usize - 1]
    }

    pub fn atomic_number(&self) -> u8 {
        self.0
    }

    /// Elements writable without brackets in SMILES.
    pub fn in_organic_subset(&self) -> bool {
        matches!(
            *self,
            Element::BORON
                | Element::CARBON
                | Element::NITROGEN
                | Element::OXYGEN
                | Element::PHOSPHORUS
                | Element::SULFUR
                | Element::FLUORINE
                | Element::CHLORINE
                | Element::BROMINE
                | Element::IODINE
        )
    }

    /// Elements that may carry the aromatic (lowercase) flag.
    pub fn aromatic_capable(&self) -> bool {
        matches!(
            *self,
            Element::BORON
                | Element::CARBON
                | Element::NITROGEN
                | Element::OXYGEN
                | Element::PHOSPHORUS
                | Element::SULFUR
                | Element(33) // As
                | Element(34) // Se
        )
    }

    pub fn is_halogen(&self) -> bool {
        matches!(self.0, 9 | 17 | 35 | 53 | 85)
    }

    /// Allowed total valences for a neutral atom, or `None` when the model
    /// has no rule for the element (the valence check then skips it).
    pub fn base_valences(&self) -> Option<&'static [u8]> {
        match *self {
            Element::HYDROGEN => Some(&[1]),
            Element::BORON => Some(&[3]),
            Element::CARBON => Some(&[4]),
            Element::NITROGEN | Element::PHOSPHORUS => Some(&[3, 5]),
            Element::OXYGEN => Some(&[2]),
            Element::SULFUR => Some(&[2, 4, 6]),
            e if e.is_halogen() => Some(&[1]),
            _ => None,
        }
    }

    /// Allowed valences after the charge shift. The shift applies to the
    /// nitrogen and oxygen families only (N+ -> 4, O- -> 1, and so on);
    /// other elements keep their neutral valences regardless of charge.
    pub fn allowed_valences(&self, charge: i32) -> Option<Vec<u8>> {
        let base = self.base_valences()?;
        let shifted = matches!(
            *self,
            Element::NITROGEN | Element::PHOSPHORUS | Element::OXYGEN | Element::SULFUR
        );
        if !shifted || charge == 0 {
            return Some(base.to_vec());
        }
        Some(
            base.iter()
                .filter_map(|&v| {
                    let shifted = v as i32 + charge;
                    u8::try_from(shifted).ok()
                })
                .collect(),
        )
    }

    /// Upper bound for the isotope sanity screen: Z <= isotope <= 3Z + 20.
    pub fn isotope_bounds(&self) -> (u16, u16) {
        let z = self.0 as u16;
        (z, 3 * z + 20)
    }
}

impl std::fmt::Display for Element {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.symbol())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_round_trip() {
        for z in 1..=118u8 {
            let e = Element(z);
            assert_eq!(Element::from_symbol(e.symbol()), Some(e));
        }
        assert_eq!(Element::from_symbol("Xx"), None);
    }

    #[test]
    fn charge_shift_applies_to_n_and_o_families_only() {
        assert_eq!(
            Element::NITROGEN.allowed_valences(1),
            Some(vec![4, 6])
        );
        assert_eq!(Element::OXYGEN.allowed_valences(-1), Some(vec![1]));
        assert_eq!(Element::CARBON.allowed_valences(1), Some(vec![4]));
        assert_eq!(Element::OXYGEN.allowed_valences(-3), Some(vec![]));
    }

    #[test]
    fn isotope_bounds_follow_z() {
        assert_eq!(Element::CARBON.isotope_bounds(), (6, 38));
        assert_eq!(Element::HYDROGEN.isotope_bounds(), (1, 23));
    }
}
