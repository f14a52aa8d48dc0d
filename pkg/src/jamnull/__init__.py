"""Link-level MU-MIMO simulator with nullspace jamming suppression and a
recurrent dueling Q-network that adapts the frame protocol online."""

__version__ = "0.1.0"
