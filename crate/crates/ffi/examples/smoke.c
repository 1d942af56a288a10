/* Parse, inspect and encode a molecule through the C API.
 *
 *   cargo build -p moldream-ffi
 *   cc -Icrates/ffi/include crates/ffi/examples/smoke.c \
 *      target/debug/libmoldream_ffi.a -lpthread -ldl -lm -o smoke
 *   ./smoke CCO
 */
#include <stdio.h>

#include "moldream.h"

int main(int argc, char **argv) {
  const char *smiles = argc > 1 ? argv[1] : "CCO";
  MdGraph *g = NULL;
  if (md_graph_from_smiles(smiles, &g) != MD_STATUS_OK) {
    fprintf(stderr, "error: %s\n", md_last_error());
    return 2;
  }
  char *key = NULL;
  char *tokens = NULL;
  double logp = 0.0;
  if (md_graph_canonical_key(g, &key) != MD_STATUS_OK ||
      md_graph_encode(g, 20, &tokens) != MD_STATUS_OK ||
      md_surrogate_logp(g, &logp) != MD_STATUS_OK) {
    fprintf(stderr, "error: %s\n", md_last_error());
    md_graph_free(g);
    return 2;
  }
  printf("moldream %s\natoms %zu\nkey %s\ntokens %s\nlogp %.2f\n", md_version(),
         md_graph_atom_count(g), key, tokens, logp);
  md_string_free(key);
  md_string_free(tokens);
  md_graph_free(g);
  return 0;
}
