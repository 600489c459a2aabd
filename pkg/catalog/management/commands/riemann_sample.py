from catalog.management.commands._base import AnalysisCommand


class Command(AnalysisCommand):
    help = 'Self-similar Riemann solution of one wave fan, sampled at time t'
    command = 'riemann_sample'
    kinds = ('flux',)

    def add_command_arguments(self, parser):
        parser.add_argument('--uminus', help='left state, comma separated')
        parser.add_argument('--family', type=int, help='1-based characteristic family (default 1)')
        parser.add_argument('--s', type=float, help='wave strength')
        parser.add_argument('--t', type=float, help='sampling time (default 1)')
        parser.add_argument('--x', help='comma-separated sample points')
        parser.add_argument('--x-min', type=float, help='left end of a uniform sample (default -1)')
        parser.add_argument('--x-max', type=float, help='right end of a uniform sample (default 1)')
        parser.add_argument('--n', type=int, help='points of a uniform sample (default 201)')
        parser.add_argument('--classical', action='store_true', default=None,
                            help='compare with the envelope solution, scalar fluxes only')
        parser.add_argument('--grid-n', type=int, help='points of the tau grid')
        parser.add_argument('--fp-tol', type=float, help='fixed-point tolerance')
        parser.add_argument('--max-iter', type=int, help='fixed-point iteration cap')
