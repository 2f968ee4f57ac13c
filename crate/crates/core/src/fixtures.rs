//! The survey tables used throughout the tests and the CLI examples.
//!
//! Table 4 cross-classifies three binary items, each of which may be
//! unanswered. Tables 5 and 8 are its subtables with missingness restricted
//! to Y1 and to (Y1, Y2).

use crate::table::IncompleteTable;

pub const TABLE4_JSON: &str = include_str!("../fixtures/table4.json");
pub const TABLE5_JSON: &str = include_str!("../fixtures/table5.json");
pub const TABLE8_JSON: &str = include_str!("../fixtures/table8.json");

pub fn table4() -> IncompleteTable {
    IncompleteTable::from_json_str(TABLE4_JSON).expect("table 4 fixture")
}

pub fn table5() -> IncompleteTable {
    IncompleteTable::from_json_str(TABLE5_JSON).expect("table 5 fixture")
}

pub fn table8() -> IncompleteTable {
    IncompleteTable::from_json_str(TABLE8_JSON).expect("table 8 fixture")
}
