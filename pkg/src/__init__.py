"""mmir: multi-modal instance refinement for domain adaptation"""
