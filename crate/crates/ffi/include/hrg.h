/* C interface to the HR grammar workbench. Generated by cbindgen. */

#ifndef HRG_H
#define HRG_H

#include <stdbool.h>
#include <stddef.h>

/**
 * Grammar class selector for [`hrg_grammar_class`].
 */
typedef enum HrgClass {
  HRG_CLASS_REGULAR_TREE = 0,
  HRG_CLASS_TREE_VERIFIABLE = 1,
  HRG_CLASS_REGULAR_GRAPH = 2,
} HrgClass;

/**
 * Result code of every fallible call.
 */
typedef enum HrgStatus {
  HRG_STATUS_OK = 0,
  HRG_STATUS_NULL_ARGUMENT = 1,
  HRG_STATUS_INVALID_UTF8 = 2,
  HRG_STATUS_PARSE = 3,
  HRG_STATUS_PRECONDITION = 4,
  HRG_STATUS_EVAL = 5,
  HRG_STATUS_CAP = 6,
  HRG_STATUS_PANIC = 7,
} HrgStatus;

/**
 * A compiled CMSO formula.
 */
typedef struct HrgFormula HrgFormula;

/**
 * An HR grammar.
 */
typedef struct HrgGrammar HrgGrammar;

/**
 * A concrete hypergraph.
 */
typedef struct HrgGraph HrgGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *hrg_last_error(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` is null or a string returned by this library, not yet freed.
 */
void hrg_string_free(char *s);

/**
 * Parse `.hg` text.
 *
 * # Safety
 * `src` is a NUL-terminated string; `out` is writable.
 */
enum HrgStatus hrg_graph_parse(const char *src, struct HrgGraph **out);

/**
 * # Safety
 * `g` is null or a live graph handle.
 */
void hrg_graph_free(struct HrgGraph *g);

/**
 * Vertex count, or 0 for a null handle.
 *
 * # Safety
 * `g` is null or a live graph handle.
 */
size_t hrg_graph_vertex_count(const struct HrgGraph *g);

/**
 * Edge count, or 0 for a null handle.
 *
 * # Safety
 * `g` is null or a live graph handle.
 */
size_t hrg_graph_edge_count(const struct HrgGraph *g);

/**
 * Parse `.hrg` text.
 *
 * # Safety
 * `src` is a NUL-terminated string; `out` is writable.
 */
enum HrgStatus hrg_grammar_parse(const char *src, struct HrgGrammar **out);

/**
 * Load a bundled grammar by name (for example `"tv-tll"`).
 *
 * # Safety
 * `name` is a NUL-terminated string; `out` is writable.
 */
enum HrgStatus hrg_grammar_asset(const char *name, struct HrgGrammar **out);

/**
 * # Safety
 * `g` is null or a live grammar handle.
 */
void hrg_grammar_free(struct HrgGrammar *g);

/**
 * Class check. For the regular classes W is taken from the declared kinds,
 * or searched when no kinds are declared.
 *
 * # Safety
 * `g` is a live grammar handle; `accepted` is writable.
 */
enum HrgStatus hrg_grammar_class(const struct HrgGrammar *g, enum HrgClass class_, bool *accepted);

/**
 * Membership of a type-0 graph in the grammar's language.
 *
 * # Safety
 * `gr` and `g` are live handles; `member` is writable.
 */
enum HrgStatus hrg_member(const struct HrgGrammar *gr, const struct HrgGraph *g, bool *member);

/**
 * Exact tree-width.
 *
 * # Safety
 * `g` is a live graph handle; `width` is writable.
 */
enum HrgStatus hrg_treewidth(const struct HrgGraph *g, size_t *width);

/**
 * Exact embeddable tree-width; `present` is false for the empty graph.
 *
 * # Safety
 * `g` is a live graph handle; `width` and `present` are writable.
 */
enum HrgStatus hrg_etw(const struct HrgGraph *g, size_t *width, bool *present);

/**
 * Whether the graph has a connected cut.
 *
 * # Safety
 * `g` is a live graph handle; `found` is writable.
 */
enum HrgStatus hrg_has_connected_cut(const struct HrgGraph *g, bool *found);

/**
 * Parse an s-expression formula.
 *
 * # Safety
 * `src` is a NUL-terminated string; `out` is writable.
 */
enum HrgStatus hrg_formula_parse(const char *src, struct HrgFormula **out);

/**
 * Compile a regular tree or tree-verifiable grammar to a CMSO sentence.
 *
 * # Safety
 * `g` is a live grammar handle; `out` is writable.
 */
enum HrgStatus hrg_formula_from_grammar(const struct HrgGrammar *g, struct HrgFormula **out);

/**
 * Evaluate a closed formula on a type-0 graph.
 *
 * # Safety
 * `f` and `g` are live handles; `result` is writable.
 */
enum HrgStatus hrg_formula_eval(const struct HrgFormula *f, const struct HrgGraph *g, bool *result);

/**
 * Print a formula; release the result with [`hrg_string_free`].
 *
 * # Safety
 * `f` is a live formula handle; `out` is writable.
 */
enum HrgStatus hrg_formula_print(const struct HrgFormula *f, char **out);

/**
 * # Safety
 * `f` is null or a live formula handle.
 */
void hrg_formula_free(struct HrgFormula *f);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* HRG_H */
