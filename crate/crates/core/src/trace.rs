//! Uniformly sampled time series of one run, with CSV import and export.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::magnetics::FluxLinkage;

/// Column order of the CSV representation.
pub const CSV_HEADER: [&str; 7] = ["t", "u_d", "u_q", "i_d", "i_q", "phi_d", "phi_q"];

/// Sampled voltages, currents and (for simulated runs) flux states.
///
/// `u_d[k]`, `u_q[k]` hold the voltage applied over `[t[k], t[k+1])`, averaged
/// over that interval, as a sampled controller reports it. Currents and fluxes
/// are instantaneous values at `t[k]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub t: Vec<f64>,
    pub u_d: Vec<f64>,
    pub u_q: Vec<f64>,
    pub i_d: Vec<f64>,
    pub i_q: Vec<f64>,
    pub phi_d: Option<Vec<f64>>,
    pub phi_q: Option<Vec<f64>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Spacing between samples (s); zero for traces with fewer than 2 samples.
    pub fn sample_interval(&self) -> f64 {
        if self.t.len() < 2 {
            0.0
        } else {
            (self.t[self.t.len() - 1] - self.t[0]) / (self.t.len() - 1) as f64
        }
    }

    pub fn duration(&self) -> f64 {
        match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn has_flux(&self) -> bool {
        self.phi_d.is_some() && self.phi_q.is_some()
    }

    /// Checks equal column lengths and a strictly increasing, uniform time axis.
    pub fn validate(&self) -> Result<()> {
        let n = self.t.len();
        let mut lens = vec![self.u_d.len(), self.u_q.len(), self.i_d.len(), self.i_q.len()];
        lens.extend(self.phi_d.as_ref().map(Vec::len));
        lens.extend(self.phi_q.as_ref().map(Vec::len));
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Trace("columns have different lengths".into()));
        }
        if self.phi_d.is_some() != self.phi_q.is_some() {
            return Err(Error::Trace("flux columns must be given together".into()));
        }
        if n < 2 {
            return Ok(());
        }
        let dt = self.sample_interval();
        if !(dt > 0.0) {
            return Err(Error::Trace("time axis is not increasing".into()));
        }
        for (k, w) in self.t.windows(2).enumerate() {
            let step = w[1] - w[0];
            if !(step > 0.0) {
                return Err(Error::Trace(format!("time axis not strictly increasing at row {}", k + 2)));
            }
            if (step - dt).abs() > 1e-6 * dt {
                return Err(Error::Trace(format!("non-uniform sampling at row {}", k + 2)));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ncol = if self.has_flux() { 7 } else { 5 };
        let io = |e: csv::Error| Error::Trace(e.to_string());
        w.write_record(&CSV_HEADER[..ncol]).map_err(io)?;
        let mut row: Vec<String> = Vec::with_capacity(ncol);
        for k in 0..self.len() {
            row.clear();
            row.push(fmt(self.t[k]));
            row.push(fmt(self.u_d[k]));
            row.push(fmt(self.u_q[k]));
            row.push(fmt(self.i_d[k]));
            row.push(fmt(self.i_q[k]));
            if let (Some(pd), Some(pq)) = (&self.phi_d, &self.phi_q) {
                row.push(fmt(pd[k]));
                row.push(fmt(pq[k]));
            }
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io("writing trace", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = r.headers().map_err(|e| Error::Trace(e.to_string()))?.clone();
        let names: Vec<&str> = headers.iter().collect();
        let with_flux = match names.as_slice() {
            h if h == &CSV_HEADER[..] => true,
            h if h == &CSV_HEADER[..5] => false,
            _ => {
                return Err(Error::Trace(format!(
                    "expected header `{}` (flux columns optional), got `{}`",
                    CSV_HEADER.join(","),
                    names.join(",")
                )))
            }
        };
        let mut tr = Trace {
            phi_d: with_flux.then(Vec::new),
            phi_q: with_flux.then(Vec::new),
            ..Trace::default()
        };
        for (n, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::Trace(e.to_string()))?;
            let mut vals = [0.0; 7];
            for (c, field) in rec.iter().enumerate() {
                vals[c] = field.parse().map_err(|_| {
                    Error::Trace(format!("row {}, column `{}`: `{field}` is not a number", n + 2, CSV_HEADER[c]))
                })?;
            }
            tr.t.push(vals[0]);
            tr.u_d.push(vals[1]);
            tr.u_q.push(vals[2]);
            tr.i_d.push(vals[3]);
            tr.i_q.push(vals[4]);
            if let (Some(pd), Some(pq)) = (tr.phi_d.as_mut(), tr.phi_q.as_mut()) {
                pd.push(vals[5]);
                pq.push(vals[6]);
            }
        }
        tr.validate()?;
        Ok(tr)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let f = std::fs::File::open(path)
            .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        Self::read_csv(std::io::BufReader::new(f))
            .map_err(|e| match e {
                Error::Trace(m) => Error::Trace(format!("{}: {m}", path.display())),
                other => other,
            })
    }

    /// Flux by integrating `u - R i` from `initial` at `t[0]`.
    ///
    /// The voltage columns are interval means, so the voltage part is summed
    /// exactly; the resistive drop uses the trapezoidal rule.
    pub fn integrated_flux(&self, r: f64, initial: FluxLinkage) -> (Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut pd = Vec::with_capacity(n);
        let mut pq = Vec::with_capacity(n);
        let (mut d, mut q) = (initial.d, initial.q);
        for k in 0..n {
            if k > 0 {
                let h = self.t[k] - self.t[k - 1];
                d += h * (self.u_d[k - 1] - 0.5 * r * (self.i_d[k - 1] + self.i_d[k]));
                q += h * (self.u_q[k - 1] - 0.5 * r * (self.i_q[k - 1] + self.i_q[k]));
            }
            pd.push(d);
            pq.push(q);
        }
        (pd, pq)
    }
}

// 17 significant digits: every f64 survives a write/read cycle bit for bit.
pub(crate) fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}
