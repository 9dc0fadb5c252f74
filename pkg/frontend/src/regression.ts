/** Ordinary least squares on (x, y) pairs. */

export interface Fit {
  slope: number;
  intercept: number;
  r2: number;
  n: number;
}

export function leastSquares(x: number[], y: number[]): Fit {
  const n = x.length;
  if (n !== y.length || n < 2) {
    throw new Error(`need at least two paired points, got ${n}`);
  }
  const mx = x.reduce((a, b) => a + b, 0) / n;
  const my = y.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  let syy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx === 0) {
    throw new Error("degenerate fit: all x values coincide");
  }
  const slope = sxy / sxx;
  const intercept = my - slope * mx;
  const r2 = syy === 0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return { slope, intercept, r2, n };
}

/** Least squares in log-log coordinates (natural log); the slope is the
 * power-law exponent. */
export function logLogFit(x: number[], y: number[]): Fit {
  const pairs = x
    .map((xi, i) => [xi, y[i]] as const)
    .filter(([a, b]) => a > 0 && b > 0);
  if (pairs.length < 2) {
    throw new Error("log-log fit needs at least two positive points");
  }
  return leastSquares(
    pairs.map(([a]) => Math.log(a)),
    pairs.map(([, b]) => Math.log(b)),
  );
}
