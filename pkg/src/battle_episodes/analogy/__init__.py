"""Structure mapping, similarity-based retrieval and generalization."""
