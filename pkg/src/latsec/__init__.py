"""latsec: desk-scale nested-lattice secrecy toolkit.

Exact entropy side-information bounds, nested-lattice sum representation,
universal-hash privacy amplification with an explicit secret encoder,
seeded-extractor key generation, a wiretap-channel simulator with exact
leakage accounting, and the closed-form secure-degrees-of-freedom map.
"""

from .entropy import (DiscreteDistribution, JointDistribution, conditional_shannon,
                      conditional_slice, min_entropy, mutual_information,
                      renyi2_entropy, shannon_entropy, side_info_violation_mass)
from .lattice import (LatticeVector, NestedLatticePair, RepresentationIndex,
                      ScaledLattice, codebook_rate, dither_encode,
                      dithered_sum_secrecy_report, enumerate_codebook, group_add,
                      mod_coarse, reconstruct_sum, representation_index)
from .hashing import (BitLabeling, EncoderKit, FiniteFieldMatrix, build_encoder,
                      collision_probability, decode_secret, encode_secret,
                      exact_hashed_entropy, full_rank_check, full_rank_lower_bound,
                      privacy_amp_bound, sample_linear_hash, secret_rate_select)
from .extractor import (ExtractorSpec, KeyProtocolSetup, KeyTranscript, extract,
                        key_rate, key_secrecy_report, run_key_protocol)
from .channel import (ChannelConfig, LayeredCodebook, SecrecySystem, Transcript,
                      exact_leakage, leakage_trend, make_codebook, ml_decode,
                      scale_channel, secrecy_rate_report, select_secrecy_hash,
                      transmit)
from .sdof import (DofPoint, GainDecomposition, alpha_of, beta_of, decompose_gain,
                   sdof_landscape, sdof_of)

__version__ = "0.1.0"
