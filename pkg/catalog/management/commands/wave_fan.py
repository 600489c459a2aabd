from catalog.management.commands._base import AnalysisCommand


class Command(AnalysisCommand):
    help = 'Wave-fan curve of one family and its rarefactions and jumps, for one or more strengths'
    command = 'wave_fan'
    kinds = ('flux',)

    def add_command_arguments(self, parser):
        parser.add_argument('--uminus', help='left state, comma separated')
        parser.add_argument('--family', type=int, help='1-based characteristic family (default 1)')
        parser.add_argument('--s', help='strength, or comma-separated strengths swept with --jobs')
        parser.add_argument('--grid-n', type=int, help='points of the tau grid')
        parser.add_argument('--fp-tol', type=float, help='fixed-point tolerance')
        parser.add_argument('--max-iter', type=int, help='fixed-point iteration cap')
