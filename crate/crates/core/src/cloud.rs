use crate::error::{Error, Result};

/// Columnar point cloud. Optional attributes are either absent or have one
/// entry per point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub positions: Vec<[f64; 3]>,
    pub colors: Option<Vec<[u8; 3]>>,
    pub intensity: Option<Vec<f32>>,
    pub labels: Option<Vec<u8>>,
}

impl PointCloud {
    pub fn from_positions(positions: Vec<[f64; 3]>) -> Self {
        Self {
            positions,
            ..Self::default()
        }
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.positions.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} points",
                labels.len(),
                self.positions.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let check = |name: &str, len: Option<usize>| match len {
            Some(l) if l != n => Err(Error::data(format!(
                "attribute '{name}' has {l} entries for {n} points"
            ))),
            _ => Ok(()),
        };
        check("color", self.colors.as_ref().map(Vec::len))?;
        check("intensity", self.intensity.as_ref().map(Vec::len))?;
        check("label", self.labels.as_ref().map(Vec::len))?;
        if let Some(i) = self
            .positions
            .iter()
            .position(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::data(format!("point {i} has a non-finite coordinate")));
        }
        Ok(())
    }
}
