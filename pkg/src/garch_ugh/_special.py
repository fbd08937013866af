from scipy.special import gammaincc


def chi2_sf(x: float, df: int) -> float:
    """Upper tail ``P(chi2_df > x)`` via the regularized incomplete gamma."""
    if x < 0 or df < 1:
        raise ValueError("chi2_sf needs x >= 0 and df >= 1")
    return float(gammaincc(df / 2.0, x / 2.0))
