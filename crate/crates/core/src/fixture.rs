//! The bundled Data Exchange Controller usage model and its canonical
//! sequence analysis table.

use crate::canonical::CanonicalTable;
use crate::model::UsageModel;

pub const DATA_EXCHANGE_TML: &str = include_str!("../fixtures/data_exchange.tml");
pub const DATA_EXCHANGE_CANON: &str = include_str!("../fixtures/data_exchange.canon");

pub fn data_exchange_model() -> UsageModel {
    UsageModel::from_tml(DATA_EXCHANGE_TML).expect("bundled model is well-formed")
}

pub fn data_exchange_table() -> CanonicalTable {
    CanonicalTable::parse(DATA_EXCHANGE_CANON).expect("bundled table is well-formed")
}
