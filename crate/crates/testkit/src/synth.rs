use infostyle::metric::{choice_probability, distance, EmbeddedTriplet};
use infostyle::PixelGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent uniform RGB pixels.
pub fn noise_grid<R: Rng>(rng: &mut R, w: usize, h: usize) -> PixelGrid {
    let px = (0..w * h).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    PixelGrid::new(w, h, px).unwrap()
}

/// A few flat rectangles on a flat background, so flat regions (zero
/// gradient) and sharp edges both occur.
pub fn blocks_grid<R: Rng>(rng: &mut R, w: usize, h: usize) -> PixelGrid {
    let bg: [u8; 3] = [rng.random(), rng.random(), rng.random()];
    let mut px = vec![bg; w * h];
    for _ in 0..rng.random_range(1..6) {
        let color: [u8; 3] = [rng.random(), rng.random(), rng.random()];
        let x0 = rng.random_range(0..w);
        let y0 = rng.random_range(0..h);
        let x1 = rng.random_range(x0..=w);
        let y1 = rng.random_range(y0..=h);
        for y in y0..y1 {
            for x in x0..x1 {
                px[y * w + x] = color;
            }
        }
    }
    PixelGrid::new(w, h, px).unwrap()
}

pub fn uniform_vec<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random::<f64>()).collect()
}

/// Triplets labeled by sampling the logistic choice model under planted
/// sparse weights.
#[derive(Clone, Debug)]
pub struct PlantedTask {
    pub w_star: Vec<f64>,
    pub train: Vec<EmbeddedTriplet>,
    pub test: Vec<EmbeddedTriplet>,
}

#[derive(Clone, Debug)]
pub struct PlantedSpec {
    pub dim: usize,
    pub nonzero: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Planted nonzero weights are drawn uniformly from this range.
    pub weight_range: (f64, f64),
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            dim: 50,
            nonzero: 5,
            n_train: 600,
            n_test: 247,
            weight_range: (10.0, 30.0),
        }
    }
}

pub fn planted_task(spec: &PlantedSpec, seed: u64) -> PlantedTask {
    let mut rng = rng(seed);
    let mut w_star = vec![0.0; spec.dim];
    let mut dims: Vec<usize> = (0..spec.dim).collect();
    for i in 0..spec.nonzero {
        let j = rng.random_range(i..spec.dim);
        dims.swap(i, j);
        w_star[dims[i]] = rng.random_range(spec.weight_range.0..spec.weight_range.1);
    }
    let mut sample = |n: usize| -> Vec<EmbeddedTriplet> {
        (0..n)
            .map(|_| {
                let a = uniform_vec(&mut rng, spec.dim);
                let b = uniform_vec(&mut rng, spec.dim);
                let c = uniform_vec(&mut rng, spec.dim);
                let p_b = choice_probability(
                    distance(&w_star, &a, &b).unwrap(),
                    distance(&w_star, &a, &c).unwrap(),
                );
                if rng.random::<f64>() < p_b {
                    EmbeddedTriplet::new(a, b, c).unwrap()
                } else {
                    EmbeddedTriplet::new(a, c, b).unwrap()
                }
            })
            .collect()
    };
    let train = sample(spec.n_train);
    let test = sample(spec.n_test);
    PlantedTask {
        w_star,
        train,
        test,
    }
}

/// Random objective instance with interior weights.
pub fn random_instance<R: Rng>(rng: &mut R, dim: usize, n: usize) -> (Vec<f64>, Vec<EmbeddedTriplet>) {
    let w = (0..dim).map(|_| rng.random_range(0.1..2.0)).collect();
    let data = (0..n)
        .map(|_| {
            EmbeddedTriplet::new(
                uniform_vec(rng, dim),
                uniform_vec(rng, dim),
                uniform_vec(rng, dim),
            )
            .unwrap()
        })
        .collect();
    (w, data)
}
