use ndarray::Array2;

use super::{row, sq_dist, ScoreModel};
use crate::error::{Error, Result};

/// Local outlier factor in novelty mode: neighbourhoods of training rows
/// exclude the row itself.
#[derive(Debug)]
pub(crate) struct Lof {
    train: Array2<f64>,
    k: usize,
    k_distance: Vec<f64>,
    lrd: Vec<f64>,
    train_scores: Vec<f64>,
}

/// Keeps lrd finite when a point sits on top of its neighbours.
const REACH_FLOOR: f64 = 1e-10;

fn neighbours(train: &Array2<f64>, x: &[f64], k: usize, skip: Option<usize>) -> Vec<(f64, usize)> {
    let mut d: Vec<(f64, usize)> = (0..train.nrows())
        .filter(|&j| Some(j) != skip)
        .map(|j| (sq_dist(x, row(train, j)).sqrt(), j))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    d.select_nth_unstable_by(k - 1, cmp);
    d.truncate(k);
    d.sort_by(cmp);
    d
}

impl Lof {
    pub(crate) fn fit(train: Array2<f64>, k: usize) -> Result<Self> {
        let n = train.nrows();
        if n <= k {
            return Err(Error::fit(
                "lof",
                format!("n_neighbors = {k} needs more than {k} training rows, got {n}"),
            ));
        }
        let hoods: Vec<Vec<(f64, usize)>> = (0..n)
            .map(|i| neighbours(&train, row(&train, i), k, Some(i)))
            .collect();
        let k_distance: Vec<f64> = hoods.iter().map(|h| h[k - 1].0).collect();
        let lrd_of = |hood: &[(f64, usize)]| {
            let reach: f64 = hood.iter().map(|&(d, j)| d.max(k_distance[j])).sum::<f64>() / k as f64;
            1.0 / (reach + REACH_FLOOR)
        };
        let lrd: Vec<f64> = hoods.iter().map(|h| lrd_of(h)).collect();
        let train_scores = hoods
            .iter()
            .zip(&lrd)
            .map(|(h, &own)| h.iter().map(|&(_, j)| lrd[j]).sum::<f64>() / k as f64 / own)
            .collect();
        Ok(Self {
            train,
            k,
            k_distance,
            lrd,
            train_scores,
        })
    }
}

impl ScoreModel for Lof {
    fn score(&self, x: &[f64]) -> f64 {
        let hood = neighbours(&self.train, x, self.k, None);
        let reach: f64 = hood
            .iter()
            .map(|&(d, j)| d.max(self.k_distance[j]))
            .sum::<f64>()
            / self.k as f64;
        let own = 1.0 / (reach + REACH_FLOOR);
        hood.iter().map(|&(_, j)| self.lrd[j]).sum::<f64>() / self.k as f64 / own
    }

    fn training_scores(&self) -> Vec<f64> {
        self.train_scores.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_grid_scores_near_one() {
        let train = Array2::from_shape_fn((25, 2), |(i, j)| if j == 0 { (i / 5) as f64 } else { (i % 5) as f64 });
        let lof = Lof::fit(train, 4).unwrap();
        let inner = lof.score(&[2.0, 2.0]);
        assert!((inner - 1.0).abs() < 0.2, "{inner}");
        let far = lof.score(&[20.0, 20.0]);
        assert!(far > 5.0, "{far}");
    }

    #[test]
    fn needs_more_rows_than_neighbours() {
        assert!(Lof::fit(array![[0.0], [1.0]], 2).is_err());
        assert!(Lof::fit(array![[0.0], [1.0], [2.0]], 2).is_ok());
    }
}
