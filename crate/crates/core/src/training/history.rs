use crate::error::{bail, Result};

pub const HISTORY_HEADER: &str = "epoch,total_loss,ii_nats,ii_plugin_bits,mse_visual,mse_audio";

/// One row of `history.csv`. Loss terms are means over the epoch's batches and are
/// summed across decoders; absent values are written as empty fields.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total_loss: f64,
    pub ii_nats: Option<f64>,
    pub ii_plugin_bits: Option<f64>,
    pub mse_visual: Option<f64>,
    pub mse_audio: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

fn field(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn parse_field(s: &str, line: usize) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    match s.parse() {
        Ok(v) => Ok(Some(v)),
        Err(_) => bail!(Format, "history line {line}: bad number {s:?}"),
    }
}

impl TrainHistory {
    pub fn push(&mut self, r: EpochRecord) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{HISTORY_HEADER}\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch,
                r.total_loss,
                field(r.ii_nats),
                field(r.ii_plugin_bits),
                field(r.mse_visual),
                field(r.mse_audio)
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(HISTORY_HEADER) {
            bail!(Format, "history must start with the header {HISTORY_HEADER:?}");
        }
        let mut records = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.trim().split(',').collect();
            if cols.len() != 6 {
                bail!(Format, "history line {}: expected 6 fields, got {}", n + 2, cols.len());
            }
            let Ok(epoch) = cols[0].parse() else {
                bail!(Format, "history line {}: bad epoch {:?}", n + 2, cols[0]);
            };
            let Some(total_loss) = parse_field(cols[1], n + 2)? else {
                bail!(Format, "history line {}: missing total loss", n + 2);
            };
            records.push(EpochRecord {
                epoch,
                total_loss,
                ii_nats: parse_field(cols[2], n + 2)?,
                ii_plugin_bits: parse_field(cols[3], n + 2)?,
                mse_visual: parse_field(cols[4], n + 2)?,
                mse_audio: parse_field(cols[5], n + 2)?,
            });
        }
        Ok(Self { records })
    }

    /// Number of epochs whose total loss rose above the previous epoch's.
    pub fn upticks(&self) -> usize {
        self.records.windows(2).filter(|w| w[1].total_loss > w[0].total_loss).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_keeps_gaps_and_bits() {
        let h = TrainHistory {
            records: vec![
                EpochRecord {
                    epoch: 1,
                    total_loss: 0.1 + 0.2,
                    ii_nats: Some(-0.25),
                    ii_plugin_bits: None,
                    mse_visual: Some(3.5),
                    mse_audio: None,
                },
                EpochRecord {
                    epoch: 2,
                    total_loss: 1e-300,
                    ii_nats: None,
                    ii_plugin_bits: Some(0.125),
                    mse_visual: None,
                    mse_audio: Some(7.0),
                },
            ],
        };
        let text = h.to_csv();
        assert!(text.starts_with(HISTORY_HEADER));
        assert!(text.contains("\n1,0.30000000000000004,-0.25,,3.5,\n"));
        assert_eq!(TrainHistory::from_csv(&text).unwrap(), h);
    }

    #[test]
    fn malformed_csv() {
        assert!(TrainHistory::from_csv("epoch,loss\n").is_err());
        assert!(TrainHistory::from_csv(&format!("{HISTORY_HEADER}\n1,2,3\n")).is_err());
        assert!(TrainHistory::from_csv(&format!("{HISTORY_HEADER}\n1,,,,,\n")).is_err());
        assert!(TrainHistory::from_csv(&format!("{HISTORY_HEADER}\nx,1,,,,\n")).is_err());
    }

    #[test]
    fn counts_upticks() {
        let rec = |epoch, total_loss| EpochRecord {
            epoch,
            total_loss,
            ii_nats: None,
            ii_plugin_bits: None,
            mse_visual: None,
            mse_audio: None,
        };
        let h = TrainHistory { records: vec![rec(1, 5.0), rec(2, 4.0), rec(3, 4.5), rec(4, 4.5), rec(5, 6.0)] };
        assert_eq!(h.upticks(), 2);
    }
}
