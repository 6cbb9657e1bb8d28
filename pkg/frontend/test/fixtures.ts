/** Synthetic CSV inputs shared by the renderer and CLI tests. */

/** Beasley-Springer-Moro approximation of the standard normal quantile. */
export function normQuantile(p: number): number {
  const a = [2.50662823884, -18.61500062529, 41.39119773534, -25.44106049637];
  const b = [-8.4735109309, 23.08336743743, -21.06224101826, 3.13082909833];
  const c = [
    0.3374754822726147, 0.9761690190917186, 0.1607979714918209, 0.0276438810333863,
    0.0038405729373609, 0.0003951896511919, 0.0000321767881768, 0.0000002888167364,
    0.0000003960315187,
  ];
  const y = p - 0.5;
  if (Math.abs(y) < 0.42) {
    const r = y * y;
    return (y * (((a[3] * r + a[2]) * r + a[1]) * r + a[0])) /
      ((((b[3] * r + b[2]) * r + b[1]) * r + b[0]) * r + 1);
  }
  let r = p > 0.5 ? 1 - p : p;
  r = Math.log(-Math.log(r));
  let x = c[0];
  for (let i = 1; i < 9; i++) x += c[i] * Math.pow(r, i);
  return p > 0.5 ? x : -x;
}

/** A perfectly Gaussian replicate set: empirical quantiles equal theoretical. */
export function syntheticQqCsv(n = 200): string {
  const lines = ["theoretical_q,empirical_q"];
  for (let i = 1; i <= n; i++) {
    const q = normQuantile((i - 0.5) / n);
    lines.push(`${q.toFixed(6)},${q.toFixed(6)}`);
  }
  return lines.join("\n") + "\n";
}

/** Exact power-law drift profile: mean = probe^-3. */
export function syntheticDriftCsv(): string {
  const lines = ["probe_norm,f_kind,mean,stderr,samples"];
  for (const r of [10, 20, 40, 80, 160]) {
    lines.push(`${r},1/V,${Math.pow(r, -3).toExponential(10)},1e-8,1000000`);
  }
  return lines.join("\n") + "\n";
}

/** Hill scan settling toward index 2 as k grows. */
export function syntheticHillCsv(): string {
  const lines = ["k,estimate"];
  [251, 453, 820, 1483, 2681, 4848, 8765, 15848].forEach((k, i) => {
    lines.push(`${k},${(2 + 1.2 / (i + 1)).toFixed(4)}`);
  });
  return lines.join("\n") + "\n";
}
