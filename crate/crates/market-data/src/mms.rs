//! Parser for the AEMO MMS CSV report format.
//!
//! MMS files interleave comment rows (`C`), header rows (`I`) that name the
//! columns of the data rows that follow, and data rows (`D`). Column
//! positions are resolved dynamically from the most recent matching `I` row.

use std::collections::HashMap;

use crate::region::Region;
use crate::series::FIVE_MIN_SECS;
use crate::time::{epoch_from_market, parse_settlement};

pub(crate) mod detail {
    pub const SETTLEMENT_COL: &str = "SETTLEMENTDATE";
    pub const REGION_COL: &str = "REGIONID";
    pub const RRP_COL: &str = "RRP";
    pub const INTERVENTION_COL: &str = "INTERVENTION";
}

/// One parsed dispatch-price row. `interval_start_ts` is the epoch-second
/// start of the 5-minute interval; AEMO stamps rows with the interval *end*
/// (settlement date), so the start is the settlement minus five minutes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispatchPriceRow {
    pub region: Region,
    pub interval_start_ts: i64,
    pub rrp: f64,
}

/// Extracts regional RRP rows from MMS dispatch-price CSV text.
///
/// Rows from intervention dispatch runs (`INTERVENTION != 0`) are skipped so
/// each interval appears once; files without an intervention column keep all
/// rows. Rows with unparsable fields are skipped.
pub fn parse_dispatch_prices(csv: &str) -> Vec<DispatchPriceRow> {
    let mut col_map: HashMap<String, usize> = HashMap::new();
    let mut rows = Vec::new();

    for line in csv.lines() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            continue;
        }
        let tag = fields[0].trim();
        let table = fields[1].trim();
        let sub = fields[2].trim();
        let is_price_table = table.eq_ignore_ascii_case("DISPATCH")
            && (sub.eq_ignore_ascii_case("PRICE") || sub.eq_ignore_ascii_case("DISPATCHPRICE"));

        if tag == "I" && is_price_table {
            col_map.clear();
            for (i, f) in fields.iter().enumerate() {
                col_map.insert(f.trim().trim_matches('"').to_ascii_uppercase(), i);
            }
            continue;
        }
        if tag != "D" || !is_price_table || col_map.is_empty() {
            continue;
        }

        let get = |name: &str| col_map.get(name).copied().filter(|&i| i < fields.len());
        let (Some(ri), Some(pi), Some(ti)) = (
            get(detail::REGION_COL),
            get(detail::RRP_COL),
            get(detail::SETTLEMENT_COL),
        ) else {
            continue;
        };

        if let Some(ii) = get(detail::INTERVENTION_COL) {
            let intervention = fields[ii].trim().trim_matches('"');
            if !intervention.is_empty() && intervention != "0" {
                continue;
            }
        }

        let Some(region) = Region::parse(fields[ri].trim().trim_matches('"')) else {
            continue;
        };
        let Ok(rrp) = fields[pi].trim().trim_matches('"').parse::<f64>() else {
            continue;
        };
        let Some(settlement) = parse_settlement(fields[ti]) else {
            continue;
        };
        rows.push(DispatchPriceRow {
            region,
            interval_start_ts: epoch_from_market(settlement) - FIVE_MIN_SECS,
            rrp,
        });
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::{epoch_at_midnight, parse_date};

    const SAMPLE: &str = "\
C,NEMP.WORLD,DISPATCHIS,AEMO,PUBLIC,2023/01/01,00:00:00
I,DISPATCH,PRICE,1,SETTLEMENTDATE,RUNNO,REGIONID,INTERVENTION,RRP,RAISE6SECRRP
D,DISPATCH,PRICE,1,\"2023/01/01 00:05:00\",1,QLD1,0,85.5,1.0
D,DISPATCH,PRICE,1,\"2023/01/01 00:05:00\",1,NSW1,0,90.25,1.0
D,DISPATCH,PRICE,1,\"2023/01/01 00:10:00\",1,QLD1,0,-12.75,1.0
D,DISPATCH,PRICE,1,\"2023/01/01 00:10:00\",2,QLD1,1,999.0,1.0
D,DISPATCH,PRICE,1,\"2023/01/01 00:15:00\",1,XX9,0,50.0,1.0
C,END OF REPORT
";

    #[test]
    fn parses_data_rows_via_header_map() {
        let rows = parse_dispatch_prices(SAMPLE);
        let qld: Vec<_> = rows.iter().filter(|r| r.region == Region::QLD).collect();
        assert_eq!(qld.len(), 2, "intervention row and unknown region dropped");
        assert_eq!(qld[0].rrp, 85.5);
        assert_eq!(qld[1].rrp, -12.75);
        let midnight = epoch_at_midnight(parse_date("2023-01-01").unwrap());
        // Settlement 00:05 labels the interval starting at midnight.
        assert_eq!(qld[0].interval_start_ts, midnight);
        assert_eq!(qld[1].interval_start_ts, midnight + 300);
        assert!(rows.iter().any(|r| r.region == Region::NSW));
    }

    #[test]
    fn header_reorder_is_respected() {
        let csv = "\
I,DISPATCH,PRICE,1,RRP,REGIONID,SETTLEMENTDATE
D,DISPATCH,PRICE,1,42.0,TAS1,\"2024/02/29 12:30:00\"
";
        let rows = parse_dispatch_prices(csv);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].region, Region::TAS);
        assert_eq!(rows[0].rrp, 42.0);
    }

    #[test]
    fn data_before_header_is_ignored() {
        let csv = "D,DISPATCH,PRICE,1,\"2023/01/01 00:05:00\",1,QLD1,0,85.5\n";
        assert!(parse_dispatch_prices(csv).is_empty());
    }
}
