#ifndef SRDFT_H
#define SRDFT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum SrdftStatus {
  SRDFT_STATUS_OK = 0,
  SRDFT_STATUS_NULL_POINTER = 1,
  /**
   * Bad UTF-8, bad lengths or inconsistent handles.
   */
  SRDFT_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Malformed basis, XYZ or configuration text.
   */
  SRDFT_STATUS_PARSE = 3,
  /**
   * SCF did not converge, singular overlap, unstable numerics.
   */
  SRDFT_STATUS_NUMERICAL = 4,
  SRDFT_STATUS_CHECKPOINT = 5,
  SRDFT_STATUS_IO = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  SRDFT_STATUS_PANIC = 7,
} SrdftStatus;

/**
 * Parsed basis set.
 */
typedef struct SrdftBasis SrdftBasis;

/**
 * Trained model parameters.
 */
typedef struct SrdftModel SrdftModel;

/**
 * Atoms, positions and charge.
 */
typedef struct SrdftMolecule SrdftMolecule;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on this thread.
 */
const char *srdft_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *srdft_version(void);

/**
 * The built-in STO-3G basis (H through Ne).
 *
 * # Safety
 * `out` must be valid for one write.
 */
enum SrdftStatus srdft_basis_sto3g(struct SrdftBasis **out);

/**
 * Parse a basis in Gaussian94 format.
 *
 * # Safety
 * `basis_text` is a NUL-terminated string; `out` must be valid for one write.
 */
enum SrdftStatus srdft_basis_parse(const char *basis_text, struct SrdftBasis **out);

/**
 * # Safety
 * `basis` is null or came from this library and is not used afterwards.
 */
void srdft_basis_free(struct SrdftBasis *basis);

/**
 * Molecule from `n_atoms` atomic numbers and an `n_atoms x 3` row-major
 * position array in Bohr.
 *
 * # Safety
 * `atomic_numbers` holds `n_atoms` values, `positions` holds `3 n_atoms`;
 * `out` must be valid for one write.
 */
enum SrdftStatus srdft_molecule_new(const uint32_t *atomic_numbers,
                                    const double *positions,
                                    uintptr_t n_atoms,
                                    int32_t charge,
                                    struct SrdftMolecule **out);

/**
 * First frame of an XYZ text with coordinates in Angstrom.
 *
 * # Safety
 * `xyz` is a NUL-terminated string; `out` must be valid for one write.
 */
enum SrdftStatus srdft_molecule_from_xyz(const char *xyz,
                                         int32_t charge,
                                         struct SrdftMolecule **out);

/**
 * # Safety
 * `molecule` is a live handle.
 */
uintptr_t srdft_molecule_n_atoms(const struct SrdftMolecule *molecule);

/**
 * # Safety
 * `molecule` is null or came from this library and is not used afterwards.
 */
void srdft_molecule_free(struct SrdftMolecule *molecule);

/**
 * Converged RHF total energy with default SCF settings. Non-convergence is
 * reported as `Numerical`.
 *
 * # Safety
 * Handles are live; `energy` must be valid for one write.
 */
enum SrdftStatus srdft_scf_energy(const struct SrdftMolecule *molecule,
                                  const struct SrdftBasis *basis,
                                  double *energy);

/**
 * Load model parameters from a checkpoint file.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` must be valid for one write.
 */
enum SrdftStatus srdft_model_load(const char *path, struct SrdftModel **out);

/**
 * # Safety
 * `model` is null or came from this library and is not used afterwards.
 */
void srdft_model_free(struct SrdftModel *model);

/**
 * Number of basis functions the model predicts for; 0 for a null handle.
 *
 * # Safety
 * `model` is null or a live handle.
 */
uintptr_t srdft_model_n_basis(const struct SrdftModel *model);

/**
 * Energy of the model's predicted orbitals at `molecule`.
 *
 * # Safety
 * Handles are live; `energy` must be valid for one write.
 */
enum SrdftStatus srdft_model_energy(const struct SrdftModel *model,
                                    const struct SrdftMolecule *molecule,
                                    const struct SrdftBasis *basis,
                                    double *energy);

/**
 * Predicted coefficient matrix, `n x n` column-major with `n` from
 * [`srdft_model_n_basis`]; `len` must equal `n * n`.
 *
 * # Safety
 * Handles are live; `out` holds `len` doubles.
 */
enum SrdftStatus srdft_model_coefficients(const struct SrdftModel *model,
                                          const struct SrdftMolecule *molecule,
                                          const struct SrdftBasis *basis,
                                          double *out,
                                          uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SRDFT_H */
