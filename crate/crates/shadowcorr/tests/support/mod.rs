//! Shared oracles for the integration suites. Everything here is computed
//! independently of the library's erfc/quadrature code paths.

/// 20-point Gauss-Legendre nodes for [-1, 1], positive half.
const GL_NODES: [f64; 10] = [
    0.076526521133497333755,
    0.227785851141645078080,
    0.373706088715419560673,
    0.510867001950827098004,
    0.636053680726515025453,
    0.746331906460150792614,
    0.839116971822218823395,
    0.912234428251325905868,
    0.963971927277913791268,
    0.993128599185094924786,
];
const GL_WEIGHTS: [f64; 10] = [
    0.152753387130725850698,
    0.149172986472603746788,
    0.142096109318382051329,
    0.131688638449176626898,
    0.118194531961518417312,
    0.101930119817240435037,
    0.083276741576704748725,
    0.062672048334109063570,
    0.040601429800386941331,
    0.017614007139152118312,
];

pub fn density(x: f64) -> f64 {
    0.3989422804014326779 * (-0.5 * x * x).exp()
}

/// Q(x) by brute-force composite quadrature of the density over [x, 40].
pub fn oracle_q(x: f64) -> f64 {
    let panels = 400;
    let (a, b) = (x, 40.0);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let c = a + (k as f64 + 0.5) * h;
        let mut acc = 0.0;
        for i in 0..10 {
            let d = 0.5 * h * GL_NODES[i];
            acc += GL_WEIGHTS[i] * (density(c + d) + density(c - d));
        }
        total += acc * 0.5 * h;
    }
    total
}

/// Closed-form orthant probability at zero thresholds:
/// P(X > 0, Y > 0) = 1/4 + asin(rho) / (2 pi).
pub fn sheppard(rho: f64) -> f64 {
    0.25 + rho.asin() / (2.0 * std::f64::consts::PI)
}

/// Distance to the next representable double above |x|.
pub fn ulp(x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        return f64::MIN_POSITIVE;
    }
    f64::from_bits(x.to_bits() + 1) - x
}
