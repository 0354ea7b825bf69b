//! The moment term structure of P-period trading returns.

use crate::error::{Error, Result};
use std::io::{Read, Write};

/// Second and third moments and skewness of the P-period return, per P.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MomentTermStructure {
    pub periods: Vec<usize>,
    pub mu2: Vec<f64>,
    pub mu3: Vec<f64>,
    pub kappa3: Vec<f64>,
    /// Standard errors of `kappa3` (simulation and disjoint-window estimates).
    pub se_kappa3: Option<Vec<f64>>,
    /// Number of P-period samples behind each row (estimates only).
    pub n_samples: Option<Vec<usize>>,
}

/// `μ3 / μ2^{3/2}`, with 0 when both moments vanish.
pub fn skewness(mu2: f64, mu3: f64) -> f64 {
    if mu2 == 0.0 && mu3 == 0.0 {
        0.0
    } else {
        mu3 / mu2.powf(1.5)
    }
}

impl MomentTermStructure {
    /// Builds the structure from moments, deriving κ3.
    pub fn from_moments(periods: Vec<usize>, mu2: Vec<f64>, mu3: Vec<f64>) -> Self {
        let kappa3 = mu2.iter().zip(&mu3).map(|(&m2, &m3)| skewness(m2, m3)).collect();
        Self {
            periods,
            mu2,
            mu3,
            kappa3,
            se_kappa3: None,
            n_samples: None,
        }
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    /// Row index for period `p`.
    pub fn index_of(&self, p: usize) -> Option<usize> {
        self.periods.iter().position(|&q| q == p)
    }

    /// κ3 at period `p`, if present.
    pub fn kappa3_at(&self, p: usize) -> Option<f64> {
        self.index_of(p).map(|i| self.kappa3[i])
    }

    /// Period and value of the largest κ3.
    pub fn peak(&self) -> Option<(usize, f64)> {
        self.periods
            .iter()
            .zip(&self.kappa3)
            .fold(None, |best: Option<(usize, f64)>, (&p, &k)| match best {
                Some((_, b)) if b >= k => best,
                _ => Some((p, k)),
            })
    }

    /// Pointwise negation of the odd moments.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.mu3.iter_mut().for_each(|x| *x = -*x);
        out.kappa3.iter_mut().for_each(|x| *x = -*x);
        out
    }

    /// Writes comma-separated columns `P,mu2,mu3,kappa3` plus
    /// `se_kappa3,n_samples` when present. Floats use the shortest
    /// representation that parses back to the identical value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["P", "mu2", "mu3", "kappa3"];
        if self.se_kappa3.is_some() {
            header.push("se_kappa3");
        }
        if self.n_samples.is_some() {
            header.push("n_samples");
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![
                self.periods[i].to_string(),
                self.mu2[i].to_string(),
                self.mu3[i].to_string(),
                self.kappa3[i].to_string(),
            ];
            if let Some(se) = &self.se_kappa3 {
                row.push(se[i].to_string());
            }
            if let Some(n) = &self.n_samples {
                row.push(n[i].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let need = |name: &'static str| {
            col(name).ok_or_else(|| Error::PriceParse {
                row: 1,
                message: format!("missing column `{name}`"),
            })
        };
        let (ip, i2, i3, ik) = (need("P")?, need("mu2")?, need("mu3")?, need("kappa3")?);
        let (ise, ins) = (col("se_kappa3"), col("n_samples"));
        let mut out = MomentTermStructure {
            se_kappa3: ise.map(|_| Vec::new()),
            n_samples: ins.map(|_| Vec::new()),
            ..Default::default()
        };
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            let field = |c: usize| -> Result<&str> {
                rec.get(c).ok_or_else(|| Error::PriceParse {
                    row,
                    message: "short row".into(),
                })
            };
            let float = |c: usize| -> Result<f64> {
                field(c)?.parse().map_err(|e| Error::PriceParse {
                    row,
                    message: format!("{e}"),
                })
            };
            let int = |c: usize| -> Result<usize> {
                field(c)?.parse().map_err(|e| Error::PriceParse {
                    row,
                    message: format!("{e}"),
                })
            };
            out.periods.push(int(ip)?);
            out.mu2.push(float(i2)?);
            out.mu3.push(float(i3)?);
            out.kappa3.push(float(ik)?);
            if let (Some(c), Some(v)) = (ise, out.se_kappa3.as_mut()) {
                v.push(float(c)?);
            }
            if let (Some(c), Some(v)) = (ins, out.n_samples.as_mut()) {
                v.push(int(c)?);
            }
        }
        Ok(out)
    }
}
