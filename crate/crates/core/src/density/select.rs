use crate::ers::SuperpixelMap;
use crate::error::{Error, Result};

/// The highest-density pixels of each superpixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepresentativeSet {
    /// Selected pixel indices, ascending.
    ids: Vec<usize>,
    /// Superpixel id of each selected pixel.
    owner: Vec<u32>,
    /// Positions in `ids` of each superpixel's representatives, by `id - 1`.
    by_superpixel: Vec<Vec<usize>>,
    k: usize,
}

impl RepresentativeSet {
    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn owner(&self) -> &[u32] {
        &self.owner
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Node positions (into [`RepresentativeSet::ids`]) of superpixel `sp`'s
    /// representatives, by descending density.
    pub fn of_superpixel(&self, sp: u32) -> &[usize] {
        &self.by_superpixel[sp as usize - 1]
    }

    pub fn n_superpixels(&self) -> usize {
        self.by_superpixel.len()
    }
}

/// Picks, within every superpixel, the `k` pixels of largest `zeta` (ties to
/// the smaller pixel index). Superpixels with fewer than `k` pixels
/// contribute all of them.
pub fn select_representatives(
    zeta: &[f64],
    superpixels: &SuperpixelMap,
    k: usize,
) -> Result<RepresentativeSet> {
    if k == 0 {
        return Err(Error::param("representatives per superpixel must be >= 1"));
    }
    if zeta.len() != superpixels.n_pixels() {
        return Err(Error::Dimension(format!(
            "{} densities for {} pixels",
            zeta.len(),
            superpixels.n_pixels()
        )));
    }
    let mut chosen: Vec<(usize, u32)> = Vec::new();
    for (s, mut members) in superpixels.members().into_iter().enumerate() {
        members.sort_by(|&a, &b| zeta[b].total_cmp(&zeta[a]).then(a.cmp(&b)));
        members.truncate(k);
        chosen.extend(members.into_iter().map(|i| (i, s as u32 + 1)));
    }
    chosen.sort_unstable();
    let ids: Vec<usize> = chosen.iter().map(|c| c.0).collect();
    let owner: Vec<u32> = chosen.iter().map(|c| c.1).collect();
    let mut by_superpixel = vec![Vec::new(); superpixels.n_superpixels()];
    for (pos, &o) in owner.iter().enumerate() {
        by_superpixel[o as usize - 1].push(pos);
    }
    for list in &mut by_superpixel {
        list.sort_by(|&a, &b| zeta[ids[b]].total_cmp(&zeta[ids[a]]).then(a.cmp(&b)));
    }
    Ok(RepresentativeSet {
        ids,
        owner,
        by_superpixel,
        k,
    })
}
