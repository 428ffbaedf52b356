"""Extended-precision reference values for the drawdown-time CDF tables and
the insurance price table, via mpmath's Talbot inversion (independent of the
crate's Euler inversion)."""
import mpmath as mp

mp.mp.dps = 40


def coeffs(mu, sigma, a, lam):
    mu, sigma, a = mp.mpf(mu), mp.mpf(sigma), mp.mpf(a)
    d = mp.sqrt(mu**2 + 2 * lam * sigma**2)
    bp = (-mu + d) / sigma**2
    bm = (-mu - d) / sigma**2
    den = mp.exp(-bm * a) - mp.exp(-bp * a)
    b = (bp * mp.exp(-bm * a) - bm * mp.exp(-bp * a)) / den
    c = (bp - bm) / den
    return bp, bm, b, c


def cdf(mu, sigma, a, n, t, tilde):
    def f(lam):
        bp, bm, b, c = coeffs(mu, sigma, a, lam)
        v = (c / b) ** n
        if tilde:
            v *= mp.exp(-(n - 1) * bp * a)
        return v / lam
    return mp.invertlaplace(f, t, method="talbot")


def price(kind, tilde, sigma, T, alpha=0.15, r=0.05, exponent_level=None):
    abar = -mp.log(1 - mp.mpf(alpha))
    mu = mp.mpf(r) - mp.mpf(sigma) ** 2 / 2
    lvl = abar if exponent_level is None else exponent_level

    def f(lam):
        bp, bm, b, c = coeffs(mu, sigma, abar, lam + r)
        q = c / b
        den = 1 - (mp.exp(-bp * lvl) * q if tilde else q)
        pre = 1 / (lam + r) if kind == 1 else 1 / lam
        return pre * q / den
    return mp.invertlaplace(f, T, method="talbot")


if __name__ == "__main__":
    for sigma in (0.2, 0.12):
        print("table sigma", sigma)
        for n in range(1, 7):
            row = []
            for mu in (0.1, 0.0, -0.1):
                row.append(cdf(mu, sigma, 0.1, n, 1, False))
                row.append(cdf(mu, sigma, 0.1, n, 1, True))
            print(n, " ".join(mp.nstr(v, 10) for v in row))
    print("price table")
    for sigma in (0.1, 0.2):
        for T in (1, 2, 3):
            row = [price(1, False, sigma, T), price(1, True, sigma, T),
                   price(2, False, sigma, T), price(2, True, sigma, T)]
            print(T, sigma, " ".join(mp.nstr(v, 10) for v in row))
