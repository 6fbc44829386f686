"""lyralign: desk-scale lyrics-to-audio forced alignment.

Pipeline stages: WAV decoding and canonicalization (audio), per-frame feature
extraction (features), pronunciation handling (lexicon), GMM-HMM plus hybrid
MLP acoustic modeling (am), lyrics-graph Viterbi alignment (graph/aligner),
boundary-error metrics (evaluate), and a subcommand CLI (cli).
"""

__version__ = "0.1.0"
