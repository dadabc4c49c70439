"""Unit conversions. Everything inside the package runs in Hartree atomic
units (hbar = m_e = e = a0 = 1); these constants are the only place where
laboratory units enter."""

FS_TO_AU = 41.341374575751          # 1 fs in atomic time units
CM1_TO_HARTREE = 4.5563352529e-6    # 1 cm^-1 in hartree
ANGSTROM_TO_BOHR = 1.8897259886     # 1 Angstrom in bohr
AMU_TO_ME = 1822.888486209          # 1 amu in electron masses

PS_TO_AU = 1000.0 * FS_TO_AU

# Half-width lifetime convention: tau_ps * gamma_cm1 = hbar / 2 expressed
# in ps * cm^-1.  A fitted population decay P ~ exp(-gamma t) reported as an
# energy gamma (cm^-1) maps to tau_ps = LIFETIME_PS_CM1 / gamma_cm1.
LIFETIME_PS_CM1 = 1.0 / (2.0 * CM1_TO_HARTREE * PS_TO_AU)


def fs_to_au(t_fs: float) -> float:
    return t_fs * FS_TO_AU


def au_to_fs(t_au: float) -> float:
    return t_au / FS_TO_AU


def ps_to_au(t_ps: float) -> float:
    return t_ps * PS_TO_AU


def au_to_ps(t_au: float) -> float:
    return t_au / PS_TO_AU


def cm1_to_hartree(e_cm1: float) -> float:
    return e_cm1 * CM1_TO_HARTREE


def hartree_to_cm1(e_hartree: float) -> float:
    return e_hartree / CM1_TO_HARTREE


def amu_to_me(m_amu: float) -> float:
    return m_amu * AMU_TO_ME


def gamma_cm1_from_rate_au(rate_au: float) -> float:
    """Population decay rate (1/atomic time) as an energy width in cm^-1."""
    return rate_au / CM1_TO_HARTREE


def lifetime_ps_from_gamma_cm1(gamma_cm1: float) -> float:
    """Half-width lifetime (ps) for a decay width gamma in cm^-1."""
    if gamma_cm1 <= 0.0:
        return float("inf")
    return LIFETIME_PS_CM1 / gamma_cm1
