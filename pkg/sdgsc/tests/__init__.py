from sdgsc.tests.test_ndnet import *
from sdgsc.tests.test_formats import *
from sdgsc.tests.test_channel import *
from sdgsc.tests.test_encoder import *
from sdgsc.tests.test_diffusion import *
from sdgsc.tests.test_decoder import *
from sdgsc.tests.test_metrics import *
from sdgsc.tests.test_config import *
from sdgsc.tests.test_dataset import *
from sdgsc.tests.test_pipeline import *
from sdgsc.tests.test_cli import *
